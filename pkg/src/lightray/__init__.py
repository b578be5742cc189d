"""Numerical light-ray transform of vector fields on Minkowski space.

The pipeline: analytic or sampled covector fields (fields), ray geometry and
causal classification (minkowski), forward line integrals over acquisition
apertures (raytransform), discrete Fourier layer with slice-identity checks
(spectral), gauge-invariant curl/d-form spectrum recovery on the space-like
cone (inversion), masked-aperture support experiments (scenarios), binary
grid and CSV formats (gridio), and a reproducible command line (cli,
config).
"""

from .config import RunConfig, load_config, parse_config, serialize_config
from .errors import (
    ApertureTooSmall,
    BadMagic,
    ConfigError,
    DegenerateGradient,
    DegenerateXi,
    EmptyAdmissibleSet,
    GridFormatError,
    InconsistentRows,
    LightrayError,
    NoEnvelope,
    NotOnSurface,
    NotSpaceLike,
    OutOfBand,
    QuadratureBudgetExceeded,
    RankDeficient,
    SingularPerturbation,
    TruncatedPayload,
    WrongDimension,
)
from .fields import (
    AnalyticScalar,
    CallableScalar,
    SampledScalar,
    ScalarPotential,
    SupportEnvelope,
    VectorField,
    builtin_field,
    builtin_field_names,
    builtin_potential,
    builtin_potential_names,
    curl2,
    d_form,
    gradient_field,
    tilde_f,
)
from .gridio import GridData, grid_bytes, grid_from_bytes, read_grid, write_grid
from .inversion import (
    DFormSpectrum,
    InversionResult,
    SliceSystem,
    gauge_complement_basis,
    invert_sinogram,
    obstruction_witness,
    solve_gauge_quotient,
)
from .minkowski import (
    CausalClass,
    LightRay,
    PerturbationSet,
    boost_to_axis,
    causal_class,
    chart_angles,
    circle_directions_many,
    direction_set,
    minkowski_form,
    perturbation_determinant,
    perturbation_matrix,
    ray_point,
    spherical_theta,
    theta_pm,
    theta_pm_many,
)
from .raytransform import (
    AcquisitionSet,
    Quadrature,
    Sinogram,
    acquisition_from_directions,
    acquisition_n2,
    acquisition_n3,
    directional_transform_exact,
    directional_transform_fd,
    lightray_transform,
    make_sinogram,
)
from .scenarios import (
    CylinderScenario,
    GammaSurface,
    RecoveryReport,
    RegionRow,
    conormal,
    cylinder_aperture,
    exterior_aperture,
    psi,
    ray_min_psi,
    report_csv,
    report_text,
    support_experiment,
)
from .spectral import (
    ConeMask,
    FieldGrid,
    SliceGapReport,
    SpectralGrid,
    dft_field,
    frequency_axes,
    idft_field,
    sample_field,
    slice_gap_report,
    slice_lhs,
    spacelike_mask,
)

__version__ = "0.1.0"
