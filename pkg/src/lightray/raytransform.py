"""Forward light-ray transform by quadrature and acquisition geometry.

The transform of a covector field f along the ray s -> (s, x + s theta) is
the integral of f(s, x + s theta) . (1, theta) ds.  Support envelopes make
the integration interval finite; quadrature is either composite Simpson
with automatic panel refinement (batched over rays) or an adaptive Simpson
subdivision for single rays.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NoEnvelope, QuadratureBudgetExceeded, WrongDimension
from .fields import SupportEnvelope, VectorField, d_form_rules
from .minkowski import LightRay, chart_angles, spherical_theta

__all__ = [
    "AcquisitionSet",
    "Quadrature",
    "Sinogram",
    "acquisition_n2",
    "acquisition_n3",
    "directional_transform_exact",
    "directional_transform_fd",
    "lightray_transform",
    "lightray_transform_with_error",
    "make_sinogram",
    "ray_interval",
    "ray_intervals_batch",
]


@dataclass(frozen=True)
class Quadrature:
    """Quadrature policy for ray integrals.

    rule is "adaptive" (recursive Simpson, single rays) or "simpson"
    (fixed composite Simpson, batched; panel count found by doubling until
    the Richardson estimate meets abs_tol).  interval overrides the
    envelope-derived integration range when set.
    """

    rule: str = "adaptive"
    abs_tol: float = 1e-9
    max_evals: int = 100_000
    interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.rule not in ("adaptive", "simpson"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.abs_tol <= 0 or self.max_evals < 9:
            raise ValueError("abs_tol must be positive and max_evals at least 9")


def ray_intervals_batch(env: SupportEnvelope, x: np.ndarray, theta: np.ndarray):
    """Envelope-intersection hull per ray, vectorized.

    x has shape (R, n), theta shape (n,).  Returns (lo, hi, hit) where hit
    flags rays whose hull is nonempty.  The admissible set solves
    |x + s theta| <= C|s| + R; each sign of s gives one quadratic
    inequality, and the hull of the two solution pieces is returned (the
    set itself can be disconnected when the ray crosses both cone halves).
    """
    C, rad = env.speed, env.radius
    A = 1.0 - C * C
    b = x @ theta
    csq = np.einsum("ri,ri->r", x, x) - rad * rad

    lo = np.full(b.shape, np.inf)
    hi = np.full(b.shape, -np.inf)
    hit = np.zeros(b.shape, dtype=bool)
    for sign in (1.0, -1.0):
        B = b - sign * C * rad
        disc = B * B - A * csq
        ok = disc >= 0.0
        root = np.sqrt(np.where(ok, disc, 0.0))
        r_lo = (-B - root) / A
        r_hi = (-B + root) / A
        if sign > 0:
            piece_lo = np.maximum(r_lo, 0.0)
            piece_hi = r_hi
        else:
            piece_lo = r_lo
            piece_hi = np.minimum(r_hi, 0.0)
        ok &= piece_lo <= piece_hi
        lo = np.where(ok, np.minimum(lo, piece_lo), lo)
        hi = np.where(ok, np.maximum(hi, piece_hi), hi)
        hit |= ok
    return lo, hi, hit


def ray_interval(f: VectorField, ray: LightRay):
    """Finite s-interval outside of which the integrand vanishes.

    Returns (s_min, s_max) or None when the ray misses the envelope.
    Raises NoEnvelope for fields without a support envelope.
    """
    if f.envelope is None:
        raise NoEnvelope("field has no support envelope; supply an explicit interval")
    lo, hi, hit = ray_intervals_batch(f.envelope, ray.x[None, :], ray.theta)
    if not hit[0]:
        return None
    return float(lo[0]), float(hi[0])


# --- quadrature cores --------------------------------------------------------


def _composite_simpson_batch(gvec, a, b, tol, max_evals):
    """Composite Simpson over per-ray intervals [a_r, b_r], batched.

    gvec maps a node matrix (r, K) and the row-index array it belongs to
    onto integrand values (r, K).  All intervals must satisfy b > a.  Every
    ray starts from a 32-panel pilot; rays whose Richardson estimate
    |S_fine - S_coarse|/15 exceeds tol jump to the panel count the O(h^4)
    error model predicts and keep doubling individually until their own
    estimate passes, so a ray's value never depends on its batch mates.
    Returns (values, errors, nodes).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = b - a

    def run(panels, rows):
        k = np.arange(panels + 1, dtype=float) / panels
        nodes = a[rows, None] + length[rows, None] * k[None, :]
        g = np.asarray(gvec(nodes, rows))
        w = np.ones(panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        h = length[rows] / panels
        fine = (h / 3.0) * (g @ w)
        wc = np.ones(panels // 2 + 1)
        wc[1:-1:2] = 4.0
        wc[2:-1:2] = 2.0
        coarse = (2.0 * h / 3.0) * (g[:, ::2] @ wc)
        return fine, np.abs(fine - coarse) / 15.0

    panels = 32
    all_rows = np.arange(a.size)
    fine, err = run(panels, all_rows)
    max_nodes = panels + 1
    need = err > tol
    if need.any():
        factor = np.exp2(np.ceil(np.log2((err[need] / tol) ** 0.25)))
        target = (panels * np.maximum(factor, 2.0)).astype(np.int64)
        for start in np.unique(target):
            rows = all_rows[need][target == start]
            p = int(start)
            while rows.size:
                if p + 1 > max_evals:
                    raise QuadratureBudgetExceeded(
                        f"composite Simpson needs more than {max_evals} nodes "
                        f"per ray for abs_tol {tol:g}"
                    )
                sub_fine, sub_err = run(p, rows)
                max_nodes = max(max_nodes, p + 1)
                ok = sub_err <= tol
                fine[rows[ok]] = sub_fine[ok]
                err[rows[ok]] = sub_err[ok]
                rows = rows[~ok]
                p *= 2
    return fine, err, max_nodes


def _adaptive_simpson(g, a, b, tol, max_evals):
    """Recursive Simpson via breadth-first segment queues, vectorized evals.

    g maps an array of s values to real or complex integrand values; the
    value dtype follows g.  Accepted segments contribute the
    Richardson-extrapolated value; the reported error is the sum of
    per-segment estimates.  Returns (value, error_estimate, evals).
    """
    if b <= a:
        return 0.0, 0.0, 0
    s0 = np.array([a, 0.5 * (a + b), b])
    f0 = np.asarray(g(s0))
    evals = 3
    seg_a = np.array([a])
    seg_b = np.array([b])
    seg_fa = f0[:1].copy()
    seg_fm = f0[1:2].copy()
    seg_fb = f0[2:].copy()
    seg_s = (b - a) / 6.0 * (f0[:1] + 4.0 * f0[1:2] + f0[2:])
    seg_tol = np.array([tol])

    acc_a: list[np.ndarray] = []
    acc_v: list[np.ndarray] = []
    acc_e: list[np.ndarray] = []
    while seg_a.size:
        mid = 0.5 * (seg_a + seg_b)
        lm = 0.5 * (seg_a + mid)
        rm = 0.5 * (mid + seg_b)
        evals += 2 * lm.size
        if evals > max_evals:
            raise QuadratureBudgetExceeded(
                f"adaptive Simpson exceeded {max_evals} evaluations at abs_tol {tol:g}"
            )
        f_new = np.asarray(g(np.concatenate([lm, rm])))
        f_lm = f_new[: lm.size]
        f_rm = f_new[lm.size:]
        h12 = (seg_b - seg_a) / 12.0
        s_left = h12 * (seg_fa + 4.0 * f_lm + seg_fm)
        s_right = h12 * (seg_fm + 4.0 * f_rm + seg_fb)
        s2 = s_left + s_right
        err = np.abs(s2 - seg_s) / 15.0
        done = err <= seg_tol
        if done.any():
            acc_a.append(seg_a[done])
            acc_v.append(s2[done] + (s2[done] - seg_s[done]) / 15.0)
            acc_e.append(err[done])
        split = ~done
        seg_a, seg_b, seg_fa, seg_fm, seg_fb, seg_s, seg_tol = (
            np.concatenate([seg_a[split], mid[split]]),
            np.concatenate([mid[split], seg_b[split]]),
            np.concatenate([seg_fa[split], seg_fm[split]]),
            np.concatenate([f_lm[split], f_rm[split]]),
            np.concatenate([seg_fm[split], seg_fb[split]]),
            np.concatenate([s_left[split], s_right[split]]),
            np.concatenate([seg_tol[split] * 0.5, seg_tol[split] * 0.5]),
        )
    starts = np.concatenate(acc_a)
    order = np.argsort(starts, kind="stable")
    value = np.concatenate(acc_v)[order].sum().item()
    error = float(np.concatenate(acc_e)[order].sum())
    return value, error, evals


# --- single-ray transforms ---------------------------------------------------


def _ray_integrand(f: VectorField, ray: LightRay):
    """Vectorized s -> f(s, x + s theta) . (1, theta); s may have any shape."""
    theta = ray.theta
    x = ray.x

    def g(s):
        s = np.asarray(s, dtype=float)
        coords = (s,) + tuple(x[ax] + s * theta[ax] for ax in range(x.size))
        comps = f.eval_grid(coords)
        out = comps[0].copy()
        for ax in range(x.size):
            out += theta[ax] * comps[ax + 1]
        return out

    return g


def _resolve_interval(f: VectorField, ray: LightRay, q: Quadrature):
    if q.interval is not None:
        return float(q.interval[0]), float(q.interval[1])
    return ray_interval(f, ray)


def lightray_transform_with_error(f: VectorField, ray: LightRay, q: Quadrature):
    """Ray integral together with the quadrature error estimate."""
    interval = _resolve_interval(f, ray, q)
    if interval is None or interval[1] <= interval[0]:
        return 0.0, 0.0
    a, b = interval
    g = _ray_integrand(f, ray)
    if q.rule == "adaptive":
        value, err, _ = _adaptive_simpson(g, a, b, q.abs_tol, q.max_evals)
        return value, err
    vals, errs, _ = _composite_simpson_batch(
        lambda nodes, rows: g(nodes), np.array([a]), np.array([b]), q.abs_tol, q.max_evals
    )
    return vals[0].item(), float(errs[0])


def lightray_transform(f: VectorField, ray: LightRay, q: Quadrature) -> complex:
    """Light-ray transform of f along one ray."""
    value, _ = lightray_transform_with_error(f, ray, q)
    return value


def directional_transform_fd(
    f: VectorField, ray: LightRay, v, q: Quadrature, step: float = 1e-5
) -> complex:
    """Central difference of the transform in the transverse base point.

    Approximates (v . grad_x) Lf(x, theta) with the O(step^2) central rule.
    """
    v = np.asarray(v, dtype=float)
    up = LightRay(ray.x + step * v, ray.theta)
    dn = LightRay(ray.x - step * v, ray.theta)
    return (lightray_transform(f, up, q) - lightray_transform(f, dn, q)) / (2.0 * step)


def directional_transform_exact(f: VectorField, ray: LightRay, v, q: Quadrature) -> complex:
    """Transverse derivative of the transform via the transported integrand.

    Integrates sum over i < j of f_ij (w_i v'_j - w_j v'_i) along the ray,
    where w = (1, theta) and v' = (0, v); this equals the contraction of
    the transported field with (1, theta).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (ray.n,):
        raise WrongDimension("v must be a spatial vector of length n")
    interval = _resolve_interval(f, ray, q)
    if interval is None or interval[1] <= interval[0]:
        return 0.0
    a, b = interval
    w = np.concatenate([[1.0], ray.theta])
    vprime = np.concatenate([[0.0], v])
    rules = d_form_rules(f)
    weighted = [
        (w[i] * vprime[j] - w[j] * vprime[i], rule)
        for (i, j), rule in rules.items()
        if w[i] * vprime[j] - w[j] * vprime[i] != 0.0
    ]
    theta = ray.theta
    x = ray.x
    env = f.envelope

    def g(s):
        s = np.asarray(s, dtype=float)
        coords = (s,) + tuple(x[ax] + s * theta[ax] for ax in range(x.size))
        out = np.zeros(s.shape)
        for coef, rule in weighted:
            out = out + coef * np.asarray(rule.eval(coords))
        if env is not None:
            out *= env.contains(coords)
        return out

    if q.rule == "adaptive":
        value, _, _ = _adaptive_simpson(g, a, b, q.abs_tol, q.max_evals)
        return value
    vals, _, _ = _composite_simpson_batch(
        lambda nodes, rows: g(nodes), np.array([a]), np.array([b]), q.abs_tol, q.max_evals
    )
    return vals[0].item()


# --- acquisitions and sinograms ---------------------------------------------


def _wrap_angle(angle):
    """Map angles to [-pi, pi)."""
    return np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


def _circ_dist(a, b):
    d = np.abs(_wrap_angle(a - b))
    return d


@dataclass
class AcquisitionSet:
    """Rays on a regular transverse x-grid times a set of directions.

    Directions are stored together with their chart angles; patches give
    the covered parameter ranges so the inversion can tell interpolation
    gaps from genuine coverage.  For n = 3 the directions form an
    (a, b) lattice with b periodic over the full circle.
    """

    x_origin: np.ndarray
    x_spacing: np.ndarray
    x_counts: tuple[int, ...]
    directions: np.ndarray          # (ndir, n)
    dir_params: np.ndarray          # (ndir, n-1) chart angles
    patches: tuple                  # n=2: ((center, halfwidth), ...); n=3: ((a_lo, a_hi),)
    a_vals: np.ndarray | None = None
    b_vals: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.x_counts)

    @property
    def n_dirs(self) -> int:
        return self.directions.shape[0]

    def x_axes(self) -> list[np.ndarray]:
        return [
            self.x_origin[ax] + self.x_spacing[ax] * np.arange(self.x_counts[ax])
            for ax in range(self.n)
        ]

    def x_points(self) -> np.ndarray:
        """All grid points as a (prod(counts), n) array in C order."""
        mesh = np.meshgrid(*self.x_axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def covers_n2(self, angles) -> np.ndarray:
        """True where an angle lies inside some patch (n = 2)."""
        angles = np.asarray(angles, dtype=float)
        out = np.zeros(angles.shape, dtype=bool)
        for center, halfwidth in self.patches:
            out |= _circ_dist(angles, center) <= halfwidth + 1e-9
        return out

    def covers_n3(self, a_angles) -> np.ndarray:
        """True where a polar angle lies inside the (a_lo, a_hi) window (n = 3)."""
        a_angles = np.asarray(a_angles, dtype=float)
        if not self.patches:
            return np.zeros(a_angles.shape, dtype=bool)
        a_lo, a_hi = self.patches[0]
        return (a_angles >= a_lo - 1e-9) & (a_angles <= a_hi + 1e-9)


def acquisition_n2(
    x_origin,
    x_spacing,
    x_counts,
    halfwidth: float,
    count: int,
    center: float = 0.0,
    include_opposite: bool = True,
) -> AcquisitionSet:
    """n = 2 acquisition with angle patches around center and optionally center + pi.

    Each patch samples count angles evenly over [center - halfwidth,
    center + halfwidth]; duplicates after wrapping are merged.  halfwidth
    pi/2 with the opposite patch covers the whole circle.
    """
    if count < 2:
        raise ValueError("count must be at least 2 per patch")
    if not 0.0 < halfwidth <= np.pi / 2.0 + 1e-12:
        raise ValueError("halfwidth must lie in (0, pi/2]")
    centers = [float(center)]
    if include_opposite:
        centers.append(float(center) + np.pi)
    angles = np.concatenate(
        [np.linspace(c - halfwidth, c + halfwidth, count) for c in centers]
    )
    angles = np.unique(np.round(_wrap_angle(angles), 12))
    directions = np.stack([spherical_theta((a,)) for a in angles])
    patches = tuple((_wrap_angle(c), float(halfwidth)) for c in centers)
    return AcquisitionSet(
        x_origin=np.asarray(x_origin, dtype=float),
        x_spacing=np.asarray(x_spacing, dtype=float),
        x_counts=tuple(int(c) for c in x_counts),
        directions=directions,
        dir_params=angles[:, None],
        patches=patches,
    )


def acquisition_from_directions(x_origin, x_spacing, x_counts, directions) -> AcquisitionSet:
    """Acquisition from an explicit direction list, with no coverage patches.

    Meant for identity checks and ad-hoc forward runs; the inversion treats
    an empty patch set as covering nothing.
    """
    directions = np.asarray(directions, dtype=float)
    norms = np.linalg.norm(directions, axis=-1, keepdims=True)
    directions = directions / norms
    return AcquisitionSet(
        x_origin=np.asarray(x_origin, dtype=float),
        x_spacing=np.asarray(x_spacing, dtype=float),
        x_counts=tuple(int(c) for c in x_counts),
        directions=directions,
        dir_params=chart_angles(directions),
        patches=(),
    )


def acquisition_n3(
    x_origin, x_spacing, x_counts, a_max: float, a_count: int, b_count: int
) -> AcquisitionSet:
    """n = 3 acquisition on an (a, b) chart lattice near the pole direction.

    Polar angles run from 0 to a_max inclusive (a_max = pi covers the whole
    sphere); azimuthal angles cover the full circle periodically.
    """
    if not 0.0 < a_max <= np.pi + 1e-12:
        raise ValueError("a_max must lie in (0, pi]")
    if a_count < 2 or b_count < 3:
        raise ValueError("need at least 2 polar rows and 3 azimuthal columns")
    a_vals = np.linspace(0.0, a_max, a_count)
    b_vals = 2.0 * np.pi * np.arange(b_count) / b_count
    params = np.stack(
        [np.repeat(a_vals, b_count), np.tile(b_vals, a_count)], axis=-1
    )
    directions = np.stack([spherical_theta(p) for p in params])
    return AcquisitionSet(
        x_origin=np.asarray(x_origin, dtype=float),
        x_spacing=np.asarray(x_spacing, dtype=float),
        x_counts=tuple(int(c) for c in x_counts),
        directions=directions,
        dir_params=params,
        patches=((0.0, float(a_max)),),
        a_vals=a_vals,
        b_vals=b_vals,
    )


@dataclass
class Sinogram:
    """Transform values on an acquisition, with the quadrature record."""

    acq: AcquisitionSet
    values: np.ndarray                    # (*x_counts, n_dirs), dtype follows f
    quadrature: Quadrature
    max_error: float = 0.0
    max_nodes: int = 0
    ray_mask: np.ndarray | None = None    # rays actually integrated
    field_name: str = ""
    envelope: SupportEnvelope | None = None


MAX_BATCH_ROWS = 16384      # cap on simultaneously integrated rays


def _direction_column(f, x, theta, q, mask):
    """Transform values for all rays of one direction; masked rays stay zero."""
    R = x.shape[0]
    errs = np.zeros(R)
    nodes = 0
    if q.interval is not None:
        lo = np.full(R, float(q.interval[0]))
        hi = np.full(R, float(q.interval[1]))
        hit = np.full(R, True)
    else:
        if f.envelope is None:
            raise NoEnvelope("field has no support envelope; supply an explicit interval")
        lo, hi, hit = ray_intervals_batch(f.envelope, x, theta)
    live = hit & mask & (hi > lo)
    if not live.any():
        return np.zeros(R), errs, nodes
    nsp = theta.size

    if q.rule == "simpson":
        # fixed-size chunks keep the node matrices flat in memory; the
        # chunk boundary is deterministic, so results never depend on it
        rows = np.nonzero(live)[0]
        vals = None
        for start in range(0, rows.size, MAX_BATCH_ROWS):
            part = rows[start : start + MAX_BATCH_ROWS]
            x_part = x[part]

            def gvec(node_mat, sub, x_part=x_part):
                coords = (node_mat,) + tuple(
                    x_part[sub, ax, None] + node_mat * theta[ax] for ax in range(nsp)
                )
                comps = f.eval_grid(coords)
                out = comps[0].copy()
                for ax in range(nsp):
                    out += theta[ax] * comps[ax + 1]
                return out

            v, e, used = _composite_simpson_batch(
                gvec, lo[part], hi[part], q.abs_tol, q.max_evals
            )
            if vals is None:
                vals = np.zeros(R, dtype=v.dtype)
            vals[part] = v
            errs[part] = e
            nodes = max(nodes, used)
    else:
        idxs = np.nonzero(live)[0]
        got = []
        for i in idxs:
            ray = LightRay(x[i], theta)
            g = _ray_integrand(f, ray)
            v, e, used = _adaptive_simpson(g, lo[i], hi[i], q.abs_tol, q.max_evals)
            got.append(v)
            errs[i] = e
            nodes = max(nodes, used)
        col = np.asarray(got)
        vals = np.zeros(R, dtype=col.dtype)
        vals[idxs] = col
    return vals, errs, nodes


def make_sinogram(
    f: VectorField,
    acq: AcquisitionSet,
    q: Quadrature,
    workers: int = 1,
    ray_mask: np.ndarray | None = None,
) -> Sinogram:
    """Transform values over the whole acquisition.

    ray_mask, shaped (*x_counts, n_dirs), restricts quadrature to selected
    rays; the rest are written as zero and recorded as withheld.  workers
    runs per-direction columns on a thread pool; results are written by
    direction index, so the output does not depend on the worker count.
    """
    x = acq.x_points()
    R = x.shape[0]
    ndir = acq.n_dirs
    if ray_mask is not None:
        mask_flat = ray_mask.reshape(R, ndir)
    else:
        mask_flat = np.full((R, ndir), True)
    max_err = 0.0
    max_nodes = 0

    def work(k):
        return _direction_column(f, x, acq.directions[k], q, mask_flat[:, k])

    if workers and workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(ndir)))
    else:
        results = [work(k) for k in range(ndir)]
    dtype = np.result_type(np.float64, *(vals.dtype for vals, _, _ in results))
    values = np.empty((R, ndir), dtype=dtype)
    for k, (vals, errs, nodes) in enumerate(results):
        values[:, k] = vals
        max_err = max(max_err, float(errs.max(initial=0.0)))
        max_nodes = max(max_nodes, nodes)

    return Sinogram(
        acq=acq,
        values=values.reshape(acq.x_counts + (ndir,)),
        quadrature=q,
        max_error=max_err,
        max_nodes=max_nodes,
        ray_mask=None if ray_mask is None else np.asarray(ray_mask, dtype=bool),
        field_name=f.name,
        envelope=f.envelope,
    )
