"""Discrete Fourier layer: field spectra, sinogram slices, cone masks.

The forward transform approximates hat f(zeta) = integral f(z) e^{-i z.zeta} dz
by a Riemann sum on a uniform lattice, so coefficients carry the absolute
normalization (volume element included) and the origin phase.  All frequency
axes are stored in monotone order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OutOfBand, WrongDimension
from .fields import VectorField
from .raytransform import (
    AcquisitionSet,
    Quadrature,
    Sinogram,
    acquisition_from_directions,
    make_sinogram,
)

MIN_COUNT = 8
LATTICE_SNAP = 1e-6      # fraction of a frequency step for on-lattice tests
PLANE_SNAP = 1e-9        # fraction of a step below which interpolation is skipped
FORWARD_CONVENTION = "fwd-i;absnorm"
# Streamed spectra kick in above this coefficient-array byte count.
FULL_SPECTRUM_BYTES = 300 * 1024 * 1024


def frequency_axes(counts, spacing) -> tuple[np.ndarray, ...]:
    """Monotone dual-lattice frequencies 2 pi fftshift(fftfreq(N, h)) per axis."""
    return tuple(
        2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(int(nc), float(h)))
        for nc, h in zip(counts, spacing)
    )


@dataclass
class FieldGrid:
    """Componentwise samples of a vector field on a uniform (1+n) lattice."""

    origin: np.ndarray
    spacing: np.ndarray
    samples: np.ndarray      # (ncomp, *counts)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.spacing = np.asarray(self.spacing, dtype=float)
        self.samples = np.asarray(self.samples)
        d = self.origin.size
        if self.spacing.size != d or self.samples.ndim != d + 1:
            raise WrongDimension("origin, spacing and sample axes must agree")
        if not np.all(self.spacing > 0):
            raise ConfigError("grid spacing must be positive")
        if min(self.samples.shape[1:]) < MIN_COUNT:
            raise ConfigError(f"grid needs at least {MIN_COUNT} samples per axis")

    @property
    def counts(self) -> tuple[int, ...]:
        return self.samples.shape[1:]

    @property
    def dim(self) -> int:
        return self.origin.size

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            self.origin[ax] + self.spacing[ax] * np.arange(nc)
            for ax, nc in enumerate(self.counts)
        )


def sample_field(
    f: VectorField, origin, spacing, counts, check_support: bool = True
) -> FieldGrid:
    """Sample every component of f on the lattice.

    With check_support on, the support envelope must occupy at most half the
    grid extent along every spatial axis (evaluated at the largest |t| the
    grid reaches), which keeps periodization error below the transform
    tolerances; violations raise ConfigError.
    """
    origin = np.asarray(origin, dtype=float)
    spacing = np.asarray(spacing, dtype=float)
    counts = tuple(int(c) for c in counts)
    if not (origin.size == spacing.size == len(counts)):
        raise WrongDimension("origin, spacing and counts must have equal length")
    axes = tuple(
        origin[ax] + spacing[ax] * np.arange(counts[ax]) for ax in range(len(counts))
    )
    if check_support and f.envelope is not None:
        t_axis = axes[0]
        t_max = max(abs(t_axis[0]), abs(t_axis[-1]))
        reach = f.envelope.speed * t_max + f.envelope.radius
        for ax in range(1, len(counts)):
            length = spacing[ax] * counts[ax]
            if 2.0 * reach > 0.5 * length:
                raise ConfigError(
                    f"field support (diameter {2 * reach:.3g}) exceeds half the "
                    f"grid extent {length:.3g} on axis {ax}"
                )
    shapes = np.ix_(*axes) if len(axes) > 1 else (axes[0],)
    vals = f.eval_grid(shapes)
    return FieldGrid(origin=origin, spacing=spacing, samples=vals)


@dataclass
class SpectralGrid:
    """DFT coefficients of a FieldGrid on the exact discrete dual lattice."""

    origin: np.ndarray
    spacing: np.ndarray
    freqs: tuple[np.ndarray, ...]
    coeffs: np.ndarray       # (ncomp, *counts) complex
    convention: str = FORWARD_CONVENTION

    @property
    def counts(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def dim(self) -> int:
        return self.origin.size


def _apply_origin_phase(arr: np.ndarray, origin, freqs, sign: float) -> None:
    """Multiply arr (ncomp, *counts) in place by e^{sign * i * o.zeta}, axis by axis."""
    d = len(freqs)
    for ax in range(d):
        if origin[ax] == 0.0:
            continue
        shape = (1,) * (1 + ax) + (-1,) + (1,) * (d - 1 - ax)
        arr *= np.exp(sign * 1j * origin[ax] * freqs[ax]).reshape(shape)


def dft_field(g: FieldGrid) -> SpectralGrid:
    """Forward transform of every component, absolute normalization."""
    freqs = frequency_axes(g.counts, g.spacing)
    vol = float(np.prod(g.spacing))
    sp_axes = tuple(range(1, g.dim + 1))
    coeffs = np.fft.fftshift(np.fft.fftn(g.samples, axes=sp_axes), axes=sp_axes)
    coeffs *= vol
    _apply_origin_phase(coeffs, g.origin, freqs, -1.0)
    return SpectralGrid(
        origin=g.origin.copy(), spacing=g.spacing.copy(), freqs=freqs, coeffs=coeffs
    )


def idft_field(spec: SpectralGrid) -> FieldGrid:
    """Exact inverse of dft_field up to roundoff."""
    work = spec.coeffs.astype(complex, copy=True)
    _apply_origin_phase(work, spec.origin, spec.freqs, 1.0)
    work /= float(np.prod(spec.spacing))
    sp_axes = tuple(range(1, spec.dim + 1))
    samples = np.fft.ifftn(np.fft.ifftshift(work, axes=sp_axes), axes=sp_axes)
    return FieldGrid(
        origin=spec.origin.copy(), spacing=spec.spacing.copy(), samples=samples
    )


def _lattice_indices(values: np.ndarray, freq_axis: np.ndarray, label: str) -> np.ndarray:
    """Indices of values on a uniform monotone frequency axis, snapped.

    Raises OutOfBand when a value is off the lattice by more than
    LATTICE_SNAP steps or outside the axis range.
    """
    step = freq_axis[1] - freq_axis[0]
    pos = (values - freq_axis[0]) / step
    idx = np.rint(pos).astype(int)
    if np.any(np.abs(pos - idx) > LATTICE_SNAP):
        raise OutOfBand(f"{label} does not lie on the frequency lattice")
    if np.any(idx < 0) or np.any(idx >= freq_axis.size):
        raise OutOfBand(f"{label} outside the frequency band")
    return idx


def spectrum_at(g: FieldGrid, zeta: np.ndarray) -> np.ndarray:
    """hat f at points whose spatial parts sit on the dual lattice.

    zeta has shape (P, 1+n); tau (the first entry) may be any real while
    every spatial entry must land on the lattice of frequency_axes.  The
    spatial axes are transformed with one FFT per component and the time
    axis is contracted directly, so only P columns are ever materialized;
    large grids stay within a flat memory budget.  At lattice tau this
    reproduces dft_field exactly (up to roundoff).
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim != 2 or zeta.shape[1] != g.dim:
        raise WrongDimension("zeta must have shape (P, 1+n)")
    counts = g.counts
    freqs = frequency_axes(counts, g.spacing)
    sp_idx = [
        _lattice_indices(zeta[:, ax], freqs[ax], f"xi[{ax - 1}]")
        for ax in range(1, g.dim)
    ]
    # monotone index -> raw FFT output index, per spatial axis
    raw_cols = []
    for ax, idx in enumerate(sp_idx, start=1):
        order = np.argsort(np.fft.fftfreq(counts[ax]), kind="stable")
        raw_cols.append(order[idx])
    flat = np.ravel_multi_index(raw_cols, counts[1:]) if len(raw_cols) > 1 else raw_cols[0]

    tau = zeta[:, 0]
    n_t = counts[0]
    t_steps = g.spacing[0] * np.arange(n_t)
    phase_t = np.exp(-1j * t_steps[:, None] * tau[None, :])
    vol = float(np.prod(g.spacing))
    out = np.empty((g.samples.shape[0], zeta.shape[0]), dtype=complex)
    sp_axes = tuple(range(1, g.dim))
    for c in range(g.samples.shape[0]):
        sfft = np.fft.fftn(g.samples[c], axes=sp_axes)
        cols = sfft.reshape(n_t, -1)[:, flat]
        out[c] = (cols * phase_t).sum(axis=0)
        del sfft
    out *= vol * np.exp(-1j * (zeta @ g.origin))
    return out


def spatial_freq_axes(acq: AcquisitionSet) -> tuple[np.ndarray, ...]:
    """Dual lattice of the acquisition's base-point grid."""
    return frequency_axes(acq.x_counts, acq.x_spacing)


def slice_lhs(sino: Sinogram, dir_index: int) -> np.ndarray:
    """Spatial DFT of one sinogram direction, over the monotone xi lattice."""
    acq = sino.acq
    vals = np.ascontiguousarray(sino.values[..., dir_index])
    ghat = np.fft.fftshift(np.fft.fftn(vals))
    ghat = ghat[None] * float(np.prod(acq.x_spacing))
    _apply_origin_phase(ghat, acq.x_origin, spatial_freq_axes(acq), -1.0)
    return ghat[0]


def _tau_weights(tf: float, n_t: int, order: int):
    """Interpolation stencil (plane indices, weights) at fractional plane tf.

    Snaps to a single plane within PLANE_SNAP; otherwise returns the linear
    pair (order 1) or the 4-point Lagrange window (order 3), clamped to the
    axis.
    """
    nearest = int(round(tf))
    if 0 <= nearest < n_t and abs(tf - nearest) <= PLANE_SNAP:
        return np.array([nearest]), np.array([1.0])
    if order == 1:
        i0 = min(max(int(np.floor(tf)), 0), n_t - 2)
        w = tf - i0
        return np.array([i0, i0 + 1]), np.array([1.0 - w, w])
    if order == 3:
        i0 = min(max(int(np.floor(tf)) - 1, 0), n_t - 4)
        xs = i0 + np.arange(4)
        wts = np.empty(4)
        for k in range(4):
            others = np.delete(xs, k)
            wts[k] = np.prod((tf - others) / (xs[k] - others))
        return xs, wts
    raise ConfigError(f"unsupported interpolation order {order}; use 1 or 3")


def _check_tau_range(tf: np.ndarray, n_t: int) -> None:
    if np.any(tf < -PLANE_SNAP) or np.any(tf > n_t - 1 + PLANE_SNAP):
        raise OutOfBand("theta.xi exceeds the tau lattice range")


def slice_rhs_many(
    spec: SpectralGrid, theta: np.ndarray, xi: np.ndarray, order: int = 1
) -> np.ndarray:
    """hat f(-theta.xi, xi).(1, theta) for a batch of on-lattice xi.

    tau = -theta.xi is reached by interpolation between tau planes (linear
    by default, 4-point cubic with order=3, exact when tau lands on a
    plane).  Raises OutOfBand for xi off the lattice or tau out of range.
    """
    theta = np.asarray(theta, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.shape[1] != spec.dim - 1 or theta.shape != (spec.dim - 1,):
        raise WrongDimension("xi and theta must be spatial vectors of length n")
    sp_idx = [
        _lattice_indices(xi[:, ax], spec.freqs[ax + 1], f"xi[{ax}]")
        for ax in range(spec.dim - 1)
    ]
    tau = -(xi @ theta)
    t_axis = spec.freqs[0]
    tf = (tau - t_axis[0]) / (t_axis[1] - t_axis[0])
    _check_tau_range(tf, t_axis.size)
    w_full = np.concatenate([[1.0], theta])
    out = np.empty(xi.shape[0], dtype=complex)
    for p in range(xi.shape[0]):
        planes, wts = _tau_weights(float(tf[p]), t_axis.size, order)
        cols = spec.coeffs[(slice(None), planes) + tuple(ix[p] for ix in sp_idx)]
        out[p] = w_full @ (cols @ wts)
    return out


def slice_rhs(spec: SpectralGrid, theta, xi, order: int = 1) -> complex:
    """Single-point form of slice_rhs_many."""
    return complex(slice_rhs_many(spec, theta, np.atleast_2d(xi), order)[0])


def _rhs_streamed(
    g: FieldGrid, thetas: np.ndarray, xis: np.ndarray, order: int
) -> np.ndarray:
    """Slice rhs for per-pair directions, one spectrum_at pass for all pairs.

    Gathers only the tau planes the interpolation stencils touch and
    applies the same weights as the SpectralGrid path, so results agree
    with it to roundoff, at a flat memory cost on any grid size.
    """
    freqs = frequency_axes(g.counts, g.spacing)
    t_axis = freqs[0]
    tau = -np.einsum("pi,pi->p", thetas, xis)
    tf = (tau - t_axis[0]) / (t_axis[1] - t_axis[0])
    _check_tau_range(tf, t_axis.size)
    stencils = [_tau_weights(float(v), t_axis.size, order) for v in tf]
    pts = []
    for p, (planes, _) in enumerate(stencils):
        for plane in planes:
            pts.append(np.concatenate([[t_axis[plane]], xis[p]]))
    gathered = spectrum_at(g, np.asarray(pts))
    out = np.empty(xis.shape[0], dtype=complex)
    pos = 0
    for p, (planes, wts) in enumerate(stencils):
        cols = gathered[:, pos : pos + planes.size]
        pos += planes.size
        w_full = np.concatenate([[1.0], thetas[p]])
        out[p] = w_full @ (cols @ wts)
    return out


def slice_rhs_from_grid(
    g: FieldGrid, theta: np.ndarray, xi: np.ndarray, order: int = 1
) -> np.ndarray:
    """slice_rhs_many evaluated without the full spectrum in memory."""
    theta = np.asarray(theta, dtype=float)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    thetas = np.broadcast_to(theta, (xi.shape[0], theta.size))
    return _rhs_streamed(g, thetas, xi, order)


@dataclass
class ConeMask:
    """Space-like cone indicator on a frequency lattice, with its margin."""

    mask: np.ndarray
    margin: float


def spacelike_mask(spec: SpectralGrid, delta: float = 0.1) -> ConeMask:
    """Bins with |tau| <= (1 - delta) |xi|; the DC bin is always excluded."""
    if not 0.0 <= delta < 1.0:
        raise ConfigError("delta must lie in [0, 1)")
    return ConeMask(
        mask=cone_mask_array(spec.freqs, delta), margin=float(delta)
    )


def cone_mask_array(freqs: tuple[np.ndarray, ...], delta: float) -> np.ndarray:
    """spacelike_mask on bare frequency axes."""
    d = len(freqs)
    tau = freqs[0].reshape((-1,) + (1,) * (d - 1))
    xi_sq = np.zeros(())
    for ax in range(1, d):
        shape = (1,) * ax + (-1,) + (1,) * (d - 1 - ax)
        xi_sq = xi_sq + (freqs[ax] ** 2).reshape(shape)
    mask = np.abs(tau) <= (1.0 - delta) * np.sqrt(xi_sq)
    mask &= xi_sq > 0
    return mask


# --- slice-theorem gap report ------------------------------------------------


@dataclass
class SliceGapReport:
    """Worst and per-pair relative gaps of one slice-identity check."""

    n: int
    counts: tuple[int, ...]
    max_gap: float
    gaps: np.ndarray
    thetas: np.ndarray
    xis: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    interp_order: int
    quad_tol: float


def _pick_bins(mag: np.ndarray, freqs, band_frac: float, floor_frac: float):
    """Admissible xi bins: well inside the band and carrying real magnitude."""
    d = len(freqs) + 1
    radii = np.zeros(mag.shape)
    for ax, fr in enumerate(freqs):
        shape = (1,) * ax + (-1,) + (1,) * (d - 2 - ax)
        radii = radii + (fr ** 2).reshape(shape)
    radii = np.sqrt(radii)
    band = min(float(fr.max()) for fr in freqs)
    good = (radii <= band_frac * band) & (mag >= floor_frac * mag.max())
    return np.argwhere(good)


def slice_gap_report(
    f: VectorField,
    counts_per_axis: int,
    n_dirs: int = 10,
    bins_per_dir: int = 20,
    interp_order: int = 3,
    quad_tol: float = 1e-8,
    band_frac: float = 0.35,
    floor_frac: float = 1e-2,
    seed: int = 20260823,
    workers: int = 1,
    pairs: tuple[np.ndarray, np.ndarray] | None = None,
    extent_factor: float = 4.0,
) -> SliceGapReport:
    """Sample (theta, xi) pairs and compare both sides of the slice identity.

    One cubic grid per run: the field lattice and the sinogram base-point
    lattice share the spatial axes, so slice_lhs bins line up with the
    field spectrum exactly.  Directions are uniform on the sphere; bins are
    drawn among well-resolved frequencies (inside band_frac of the Nyquist
    band, magnitude at least floor_frac of the peak), where the relative
    gap is meaningful.

    pairs, a (thetas, xis) tuple from a previous report, pins the exact
    sample set instead of drawing a fresh one.  A refinement step doubles
    counts_per_axis and extent_factor together: the sample spacing stays
    put while the frequency step halves, which shrinks the dominant
    tau-interpolation error and keeps every coarse xi bin on the refined
    lattice, so pinned pairs compare like for like.
    """
    n = f.n
    if f.envelope is None:
        raise ConfigError("slice check needs a field with a support envelope")
    reach = f.envelope.radius
    length = float(extent_factor) * reach
    nc = int(counts_per_axis)
    h = length / nc
    dim = 1 + n
    origin = np.full(dim, -length / 2.0)
    spacing = np.full(dim, h)
    grid = sample_field(f, origin, spacing, (nc,) * dim)

    rng = np.random.default_rng(seed)
    if pairs is not None:
        pair_thetas = np.asarray(pairs[0], dtype=float)
        pair_xis = np.asarray(pairs[1], dtype=float)
        thetas = np.unique(pair_thetas, axis=0)
    elif n == 2:
        ang = rng.uniform(-np.pi, np.pi, n_dirs)
        thetas = np.stack([np.sin(ang), np.cos(ang)], axis=-1)
    else:
        raw = rng.normal(size=(4 * n_dirs, 3))
        raw = raw[np.linalg.norm(raw, axis=1) > 1e-6][:n_dirs]
        thetas = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    sp_freqs = frequency_axes((nc,) * n, spacing[1:])
    use_full = grid.samples.size * 16 <= FULL_SPECTRUM_BYTES
    spec = dft_field(grid) if use_full else None

    acq = acquisition_from_directions(origin[1:], spacing[1:], (nc,) * n, thetas)
    q = Quadrature(rule="simpson", abs_tol=quad_tol)
    sino = make_sinogram(f, acq, q, workers=workers)

    lhs_list, th_list, xi_list = [], [], []
    for k in range(thetas.shape[0]):
        theta = thetas[k]
        lhs_grid = slice_lhs(sino, k)
        if pairs is not None:
            rows = np.nonzero(np.all(pair_thetas == theta, axis=1))[0]
            xi = pair_xis[rows]
            sel = np.stack(
                [_lattice_indices(xi[:, ax], sp_freqs[ax], f"xi[{ax}]") for ax in range(n)],
                axis=-1,
            )
        else:
            cand = _pick_bins(np.abs(lhs_grid), sp_freqs, band_frac, floor_frac)
            if cand.shape[0] == 0:
                raise ConfigError(
                    "no well-resolved frequency bins; loosen band_frac or floor_frac"
                )
            take = min(bins_per_dir, cand.shape[0])
            sel = cand[rng.choice(cand.shape[0], size=take, replace=False)]
            xi = np.stack([sp_freqs[ax][sel[:, ax]] for ax in range(n)], axis=-1)
        lhs_list.append(lhs_grid[tuple(sel.T)])
        th_list.append(np.broadcast_to(theta, (xi.shape[0], n)))
        xi_list.append(xi)
    lhs = np.concatenate(lhs_list)
    all_th = np.concatenate(th_list)
    all_xi = np.concatenate(xi_list)
    if use_full:
        rhs = np.concatenate(
            [
                slice_rhs_many(spec, th_list[k][0], xi_list[k], order=interp_order)
                for k in range(thetas.shape[0])
            ]
        )
    else:
        rhs = _rhs_streamed(grid, all_th, all_xi, interp_order)
    diff = np.abs(lhs - rhs)
    denom = np.abs(rhs)
    # an identically zero field yields exact zeros on both sides; report a
    # zero gap instead of 0/0
    zero_both = (diff == 0.0) & (denom == 0.0)
    gaps = np.where(zero_both, 0.0, diff / np.where(zero_both, 1.0, denom))
    return SliceGapReport(
        n=n,
        counts=(nc,) * dim,
        max_gap=float(gaps.max()),
        gaps=gaps,
        thetas=all_th,
        xis=all_xi,
        lhs=lhs,
        rhs=rhs,
        interp_order=interp_order,
        quad_tol=quad_tol,
    )
