"""Per-frequency recovery of the d-form spectrum from directional slice data.

Each space-like frequency bin zeta = (tau, xi) admits directions theta with
tau + theta.xi = 0; the sinogram slices evaluated there give linear rows
(1, theta).F = g for the field spectrum F at zeta, determined only modulo
multiples of zeta (the gauge line).  The solver works on an orthonormal
complement of that line, so the antisymmetric combinations
i(zeta_j F_i - zeta_i F_j) it emits are gauge invariant.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ApertureTooSmall,
    ConfigError,
    InconsistentRows,
    NotSpaceLike,
    RankDeficient,
    WrongDimension,
)
from .minkowski import chart_angles, circle_directions_many, theta_pm_many
from .raytransform import Sinogram, _wrap_angle
from .spectral import ConeMask, cone_mask_array, frequency_axes, idft_field, slice_lhs
from .spectral import SpectralGrid

SIGMA_MIN = 1e-8
ADMISSIBILITY_TOL = 1e-6
GEOMETRY_TOL = 1e-9

PAIRS = {
    3: ((0, 1), (0, 2), (1, 2)),
    4: ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)),
}

REASON_APERTURE = 0
REASON_RANK_DEFICIENT = 1
REASON_INCONSISTENT = 2
REASON_LABELS = {
    REASON_APERTURE: "aperture",
    REASON_RANK_DEFICIENT: "rank-deficient",
    REASON_INCONSISTENT: "inconsistent",
}


def gauge_complement_basis_many(zeta: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the Euclidean complement of each gauge line.

    zeta has shape (B, d); the result (B, d, d-1) holds the non-gauge
    columns of the Householder reflection sending e_0 to -sign(zeta_0)
    zeta/|zeta|, so every column is exactly orthogonal to its zeta.
    """
    zeta = np.asarray(zeta, dtype=float)
    norms = np.linalg.norm(zeta, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise NotSpaceLike("gauge basis undefined at zeta = 0")
    zhat = zeta / norms
    w = zhat.copy()
    w[:, 0] += np.where(zhat[:, 0] >= 0.0, 1.0, -1.0)
    wsq = np.einsum("bi,bi->b", w, w)
    d = zeta.shape[1]
    H = np.eye(d)[None] - 2.0 * w[:, :, None] * w[:, None, :] / wsq[:, None, None]
    return H[:, :, 1:]


def gauge_complement_basis(zeta) -> np.ndarray:
    """Single-covector form of gauge_complement_basis_many."""
    return gauge_complement_basis_many(np.asarray(zeta, dtype=float)[None])[0]


def obstruction_witness(zeta, phi_hat: complex = 1.0) -> np.ndarray:
    """Single-frequency covector invisible to the plus branch (n = 2).

    For space-like zeta = (tau, xi) and m = sqrt(|xi|^2 - tau^2) the vector
    eta = (1, xi_2 / m, -xi_1 / m) * phi_hat satisfies (1, theta_plus).eta = 0
    exactly while (1, theta_minus).eta = 2 phi_hat, so an aperture carrying
    only the plus branch cannot distinguish it from zero; both branches
    together pin it down.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (3,):
        raise WrongDimension("the witness formula is the n = 2 branch case")
    tau = float(zeta[0])
    xi = zeta[1:]
    m2 = float(xi @ xi) - tau * tau
    if m2 <= 0.0:
        raise NotSpaceLike("witness needs a space-like covector")
    m = np.sqrt(m2)
    return np.array([1.0, xi[1] / m, -xi[0] / m], dtype=complex) * phi_hat


@dataclass
class SliceSystem:
    """Admissible rows (1, theta_k).F = g_k collected at one frequency.

    conditioning is the smallest singular value of the design matrix on the
    gauge complement; it is filled in by solve_gauge_quotient.
    """

    zeta: np.ndarray
    thetas: np.ndarray       # (K, n)
    values: np.ndarray       # (K,) complex
    conditioning: float | None = None

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        self.values = np.atleast_1d(np.asarray(self.values))
        d = self.zeta.size
        if self.thetas.shape[1] != d - 1 or self.values.shape != (self.thetas.shape[0],):
            raise WrongDimension("thetas must be (K, n) with matching values (K,)")
        scale = max(1.0, float(np.linalg.norm(self.zeta)))
        slack = self.zeta[0] + self.thetas @ self.zeta[1:]
        if np.any(np.abs(slack) > ADMISSIBILITY_TOL * scale):
            raise ConfigError(
                "rows violate the admissibility constraint tau + theta.xi = 0"
            )


def solve_gauge_quotient(sys: SliceSystem, residual_tol: float | None = None) -> np.ndarray:
    """Minimum-norm solution of the system on the gauge complement.

    Returns F with F.zeta = 0 (Euclidean); adding any multiple of zeta to a
    solution changes nothing downstream.  Raises RankDeficient when the
    design matrix has smallest singular value below SIGMA_MIN (fewer rows
    than the complement dimension always trips this) and InconsistentRows
    when a residual_tol is given and the least-squares residual norm
    exceeds it.
    """
    d = sys.zeta.size
    Q = gauge_complement_basis(sys.zeta)
    rows = np.column_stack([np.ones(sys.thetas.shape[0]), sys.thetas])
    M = rows @ Q
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    sigma = float(S[-1]) if S.size == d - 1 else 0.0
    sys.conditioning = sigma
    if M.shape[0] < d - 1 or sigma < SIGMA_MIN:
        raise RankDeficient(
            f"design matrix at zeta {sys.zeta} has sigma_min {sigma:.3e}"
        )
    y = Vh.T @ ((U.T @ sys.values) / S)
    if residual_tol is not None:
        res = float(np.linalg.norm(M @ y - sys.values))
        if res > residual_tol:
            raise InconsistentRows(
                f"residual {res:.3e} above tolerance {residual_tol:.3e}"
            )
    return Q @ y


def dform_spectrum_at(F: np.ndarray, zeta) -> np.ndarray:
    """Antisymmetric hat df matrix i(zeta_j F_i - zeta_i F_j) at one frequency.

    Invariant under F -> F + c zeta for any scalar c.
    """
    F = np.asarray(F)
    zeta = np.asarray(zeta, dtype=float)
    return 1j * (np.outer(F, zeta) - np.outer(zeta, F))


@dataclass
class DFormSpectrum:
    """Gauge-invariant spectrum on the masked cone, with recovery bookkeeping.

    coeffs[p] holds hat df_{ij} for pairs[p] = (i, j), i < j, zero outside
    the mask and at unrecovered bins.  unrecovered_bins lists masked bins
    that were skipped, with reasons indexing REASON_LABELS.
    """

    freqs: tuple[np.ndarray, ...]
    pairs: tuple[tuple[int, int], ...]
    coeffs: np.ndarray           # (npairs, *counts) complex
    mask: ConeMask
    recovered: np.ndarray        # bool, (*counts)
    unrecovered_bins: np.ndarray      # (U, 1+n) int
    unrecovered_reasons: np.ndarray   # (U,) int

    def matrix_at(self, idx: tuple[int, ...]) -> np.ndarray:
        d = len(self.freqs)
        out = np.zeros((d, d), dtype=complex)
        for p, (i, j) in enumerate(self.pairs):
            out[i, j] = self.coeffs[(p,) + idx]
            out[j, i] = -out[i, j]
        return out

    def unrecovered_rows(self):
        """(index tuple, tau, xi, reason) per skipped bin, in index order."""
        for b in range(self.unrecovered_bins.shape[0]):
            idx = tuple(int(v) for v in self.unrecovered_bins[b])
            tau = float(self.freqs[0][idx[0]])
            xi = tuple(float(self.freqs[ax][idx[ax]]) for ax in range(1, len(idx)))
            yield idx, tau, xi, REASON_LABELS[int(self.unrecovered_reasons[b])]


@dataclass
class InversionResult:
    """DFormSpectrum plus curl mapping, spatial grids, and error bookkeeping."""

    dform: DFormSpectrum
    curl_hat: np.ndarray | None       # (3, *counts) for n = 2, else None
    spatial: np.ndarray               # real grids, one per spatial_labels entry
    spatial_labels: tuple[str, ...]
    origin: np.ndarray
    spacing: np.ndarray
    noise_floor: float
    sigma_min: float                  # worst conditioning among recovered bins
    recovered_fraction: float
    imag_leak: float                  # largest imaginary part dropped


def _circular_interp(samples: np.ndarray, targets: np.ndarray):
    """Linear interpolation brackets on a sorted circular angle grid.

    Returns (lo, hi, w_lo, w_hi) index/weight arrays; the wrap segment
    between the last and first sample is handled with the circular gap.
    """
    m = samples.size
    pos = np.searchsorted(samples, targets)
    lo = (pos - 1) % m
    hi = pos % m
    gap = (samples[hi] - samples[lo]) % (2.0 * np.pi)
    gap = np.where(gap == 0.0, 1.0, gap)
    frac = ((targets - samples[lo]) % (2.0 * np.pi)) / gap
    return lo, hi, 1.0 - frac, frac


def _slice_stack(sino: Sinogram) -> np.ndarray:
    """All per-direction spatial spectra, flattened over the xi lattice."""
    ndir = sino.acq.n_dirs
    first = slice_lhs(sino, 0).ravel()
    out = np.empty((ndir, first.size), dtype=complex)
    out[0] = first
    for r in range(1, ndir):
        out[r] = slice_lhs(sino, r).ravel()
    return out


def _gather_rows_n2(acq, G, xflat, tau, xi):
    """Interpolated data rows at theta_plus/theta_minus per bin (n = 2)."""
    plus, minus = theta_pm_many(tau, xi)
    angles = acq.dir_params[:, 0]
    a_plus = _wrap_angle(chart_angles(plus)[..., 0])
    a_minus = _wrap_angle(chart_angles(minus)[..., 0])
    cov = acq.covers_n2(a_plus) & acq.covers_n2(a_minus)
    g = np.empty((tau.size, 2), dtype=complex)
    for col, a in enumerate((a_plus, a_minus)):
        lo, hi, wlo, whi = _circular_interp(angles, a)
        g[:, col] = wlo * G[lo, xflat] + whi * G[hi, xflat]
    thetas = np.stack([plus, minus], axis=1)
    return thetas, g, cov


def _gather_rows_n3(acq, G, xflat, tau, xi, circle_count):
    """Bilinearly interpolated data rows on the admissible circle (n = 3)."""
    if acq.a_vals is None or acq.b_vals is None:
        raise ConfigError("n = 3 inversion needs an (a, b) lattice acquisition")
    dirs = circle_directions_many(tau, xi, circle_count)      # (B, K, 3)
    ang = chart_angles(dirs)
    a = ang[..., 0]
    b = np.mod(ang[..., 1], 2.0 * np.pi)
    cov = acq.covers_n3(a).all(axis=1)

    a_vals = acq.a_vals
    n_b = acq.b_vals.size
    da = a_vals[1] - a_vals[0]
    db = 2.0 * np.pi / n_b
    ia = np.clip(((a - a_vals[0]) / da).astype(int), 0, a_vals.size - 2)
    wa = np.clip((a - a_vals[ia]) / da, 0.0, 1.0)
    # np.mod can return 2 pi itself for tiny negative angles, so take the
    # fractional part before wrapping the column index
    u = b / db
    base = np.floor(u)
    wb = u - base
    jb = base.astype(int) % n_b
    jb1 = (jb + 1) % n_b

    xcol = xflat[:, None]
    g = (
        (1.0 - wa) * (1.0 - wb) * G[ia * n_b + jb, xcol]
        + (1.0 - wa) * wb * G[ia * n_b + jb1, xcol]
        + wa * (1.0 - wb) * G[(ia + 1) * n_b + jb, xcol]
        + wa * wb * G[(ia + 1) * n_b + jb1, xcol]
    )
    return dirs, g, cov


def invert_sinogram(
    sino: Sinogram,
    t_origin,
    t_spacing,
    t_counts,
    delta: float = 0.1,
    circle_count: int = 6,
    residual_tol: float | None = None,
    on_empty: str = "raise",
) -> InversionResult:
    """Recover the masked d-form spectrum and its spatial transform.

    The target geometry fixes the (1+n) output lattice; its spatial part
    must coincide with the acquisition's base-point grid so the xi lattices
    line up.  Per masked bin: admissible directions are built exactly, the
    per-direction slices are interpolated to them (linear in angle for
    n = 2, bilinear in the (a, b) chart for n = 3), and the gauge-quotient
    system is solved by batched SVD.  Bins whose directions leave the
    aperture, condition worse than SIGMA_MIN, or (with residual_tol) fit
    badly are zero-filled and reported.  With on_empty="raise" a run that
    recovers nothing raises ApertureTooSmall; on_empty="report" returns
    the empty result for inspection.
    """
    acq = sino.acq
    n = acq.n
    d = 1 + n
    t_origin = np.asarray(t_origin, dtype=float)
    t_spacing = np.asarray(t_spacing, dtype=float)
    t_counts = tuple(int(c) for c in t_counts)
    if t_origin.size != d or t_spacing.size != d or len(t_counts) != d:
        raise WrongDimension("target geometry must cover 1+n axes")
    if (
        np.any(np.abs(t_origin[1:] - acq.x_origin) > GEOMETRY_TOL)
        or np.any(np.abs(t_spacing[1:] - acq.x_spacing) > GEOMETRY_TOL)
        or t_counts[1:] != acq.x_counts
    ):
        raise ConfigError("target spatial axes must match the acquisition grid")
    if on_empty not in ("raise", "report"):
        raise ConfigError("on_empty must be 'raise' or 'report'")

    freqs = frequency_axes(t_counts, t_spacing)
    mask = cone_mask_array(freqs, delta)
    bins = np.argwhere(mask)
    tau = freqs[0][bins[:, 0]]
    xi = np.stack([freqs[ax + 1][bins[:, ax + 1]] for ax in range(n)], axis=-1)
    xflat = np.ravel_multi_index(tuple(bins[:, 1:].T), acq.x_counts)

    G = _slice_stack(sino)
    if n == 2:
        thetas, g, cov = _gather_rows_n2(acq, G, xflat, tau, xi)
    else:
        thetas, g, cov = _gather_rows_n3(acq, G, xflat, tau, xi, circle_count)
    del G

    zeta = np.concatenate([tau[:, None], xi], axis=1)
    Q = gauge_complement_basis_many(zeta)
    rows = np.concatenate([np.ones(thetas.shape[:2] + (1,)), thetas], axis=-1)
    M = np.einsum("bkd,bdn->bkn", rows, Q)
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    sigma = S[:, -1]
    ok = cov & (sigma >= SIGMA_MIN)
    reasons = np.where(cov, REASON_RANK_DEFICIENT, REASON_APERTURE)

    coef = np.einsum("bkn,bk->bn", U.conj(), g)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = coef / S
    coef[~np.isfinite(coef)] = 0.0
    y = np.einsum("bnm,bn->bm", Vh.conj(), coef)
    if residual_tol is not None:
        res = np.linalg.norm(np.einsum("bkn,bn->bk", M, y) - g, axis=1)
        bad_fit = ok & (res > residual_tol)
        reasons = np.where(bad_fit, REASON_INCONSISTENT, reasons)
        ok &= ~bad_fit
    F = np.einsum("bdn,bn->bd", Q, y)
    F[~ok] = 0.0

    pairs = PAIRS[d]
    coeffs = np.zeros((len(pairs),) + t_counts, dtype=complex)
    sel = tuple(bins[ok].T)
    for p, (i, j) in enumerate(pairs):
        vals = 1j * (zeta[ok, j] * F[ok, i] - zeta[ok, i] * F[ok, j])
        coeffs[(p,) + sel] = vals

    recovered = np.zeros(t_counts, dtype=bool)
    recovered[sel] = True
    miss = ~ok
    dform = DFormSpectrum(
        freqs=freqs,
        pairs=pairs,
        coeffs=coeffs,
        mask=ConeMask(mask=mask, margin=float(delta)),
        recovered=recovered,
        unrecovered_bins=bins[miss],
        unrecovered_reasons=reasons[miss],
    )

    n_rec = int(ok.sum())
    if n_rec == 0 and on_empty == "raise":
        raise ApertureTooSmall(
            "no masked bin is recoverable from this acquisition aperture"
        )

    # worst-case data error |vol_x * sum err| propagated through the solves
    vol_x = float(np.prod(acq.x_spacing)) * float(np.prod(acq.x_counts))
    data_err = vol_x * sino.quadrature.abs_tol
    dzeta = float(np.prod([fr[1] - fr[0] for fr in freqs]))
    k_rows = thetas.shape[1]
    per_bin = (
        2.0
        * np.linalg.norm(zeta[ok], axis=1)
        * np.sqrt(k_rows)
        / sigma[ok]
        * data_err
    )
    noise_floor = float(per_bin.sum() * dzeta / (2.0 * np.pi) ** d)

    if n == 2:
        curl_hat = np.stack([-coeffs[2], coeffs[1], -coeffs[0]])
        spectra = curl_hat
        labels = ("curl0", "curl1", "curl2")
    else:
        curl_hat = None
        spectra = coeffs
        labels = tuple(f"df{i}{j}" for i, j in pairs)
    back = idft_field(
        SpectralGrid(
            origin=t_origin, spacing=t_spacing, freqs=freqs, coeffs=spectra
        )
    )
    imag_leak = float(np.abs(back.samples.imag).max()) if back.samples.size else 0.0
    spatial = np.ascontiguousarray(back.samples.real)

    return InversionResult(
        dform=dform,
        curl_hat=curl_hat,
        spatial=spatial,
        spatial_labels=labels,
        origin=t_origin,
        spacing=t_spacing,
        noise_floor=noise_floor,
        sigma_min=float(sigma[ok].min()) if n_rec else 0.0,
        recovered_fraction=float(n_rec) / max(1, bins.shape[0]),
        imag_leak=imag_leak,
    )
