import numpy as np
import pytest

from lightray.fields import builtin_field
from lightray.inversion import invert_sinogram
from lightray.raytransform import (
    Quadrature,
    acquisition_n2,
    acquisition_n3,
    make_sinogram,
)


@pytest.fixture(scope="session")
def n2_recovery():
    """Full-aperture 64^2 pipeline: (field, sinogram, inversion result)."""
    f = builtin_field("gausspoly", 2, width=2.0 / np.sqrt(34.0))
    nc, h = 64, 0.125
    acq = acquisition_n2(
        (-4.0, -4.0), (h, h), (nc, nc), halfwidth=np.pi / 2.0, count=48
    )
    sino = make_sinogram(f, acq, Quadrature(rule="simpson", abs_tol=1e-9))
    res = invert_sinogram(sino, (-4.0,) * 3, (h,) * 3, (nc,) * 3, delta=0.1)
    return f, sino, res


@pytest.fixture(scope="session")
def n3_recovery():
    """Full-aperture 32^3 pipeline with 6 circle directions per bin."""
    f = builtin_field(
        "gausspoly", 3, width=1.0 / np.sqrt(3.15), envelope_radius=2.0
    )
    nc, h = 32, 0.25
    acq = acquisition_n3(
        (-4.0,) * 3, (h,) * 3, (nc,) * 3, a_max=np.pi, a_count=17, b_count=32
    )
    sino = make_sinogram(f, acq, Quadrature(rule="simpson", abs_tol=1e-8))
    res = invert_sinogram(
        sino, (-4.0,) * 4, (h,) * 4, (nc,) * 4, delta=0.1, circle_count=6
    )
    return f, sino, res
