"""Minkowski geometry of light rays and space-like covectors.

Events and covectors are numpy arrays of shape (1+n,) holding coordinates
(t, x^1, ..., x^n) on R^{1+n} with the quadratic form -dt^2 + |dx|^2.
Only n = 2 and n = 3 are supported.  Frequency pairings in this package are
Euclidean: a direction theta is admissible for a covector (tau, xi) when
tau + theta . xi = 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateXi,
    EmptyAdmissibleSet,
    NotSpaceLike,
    SingularPerturbation,
    WrongDimension,
)

__all__ = [
    "CAUSAL_TOL",
    "XI_TOL",
    "SINGULAR_DET_TOL",
    "CausalClass",
    "LightRay",
    "PerturbationSet",
    "boost_to_axis",
    "causal_class",
    "chart_angles",
    "circle_directions_many",
    "direction_set",
    "minkowski_form",
    "perturbation_determinant",
    "perturbation_matrix",
    "perturbation_rows",
    "ray_point",
    "spherical_theta",
    "theta_pm",
    "theta_pm_many",
]

CAUSAL_TOL = 1e-12       # absolute tolerance separating the causal classes
XI_TOL = 1e-12           # below this |xi| the branch formulas degenerate
SINGULAR_DET_TOL = 1e-10


def check_dimension(n: int) -> None:
    if n not in (2, 3):
        raise WrongDimension(f"spatial dimension must be 2 or 3, got {n}")


class CausalClass(Enum):
    SPACE_LIKE = "space-like"
    TIME_LIKE = "time-like"
    LIGHT_LIKE = "light-like"


def minkowski_form(u, v) -> float:
    """Evaluate -u^0 v^0 + u' . v' on two (1+n,) vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(-u[0] * v[0] + u[1:] @ v[1:])


def causal_class(u) -> CausalClass:
    """Classify a nonzero vector or covector by the sign of its norm.

    The comparison of |u^0| against |u'| uses the absolute tolerance
    CAUSAL_TOL, so vectors within 1e-12 of the light cone count as
    light-like.
    """
    u = np.asarray(u, dtype=float)
    check_dimension(u.shape[-1] - 1)
    t_part = abs(float(u[0]))
    s_part = float(np.hypot.reduce(np.abs(u[1:])))
    if abs(t_part - s_part) <= CAUSAL_TOL:
        return CausalClass.LIGHT_LIKE
    if t_part < s_part:
        return CausalClass.SPACE_LIKE
    return CausalClass.TIME_LIKE


@dataclass
class LightRay:
    """Future-pointing light-like line s -> (s, x + s * theta).

    x is the spatial base point at t = 0 and theta a Euclidean unit vector.
    """

    x: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        check_dimension(self.x.shape[-1])
        if self.theta.shape != self.x.shape:
            raise WrongDimension("x and theta must have matching dimension")
        if abs(float(self.theta @ self.theta) - 1.0) > 1e-12:
            raise ValueError("theta must be a unit vector within 1e-12")

    @property
    def n(self) -> int:
        return self.x.shape[-1]


def ray_point(ray: LightRay, s) -> np.ndarray:
    """Event on the ray at parameter s; s may be an array (batched in axis 0)."""
    s = np.asarray(s, dtype=float)
    t = s
    x = ray.x + np.multiply.outer(s, ray.theta)
    return np.concatenate([t[..., None], x], axis=-1) if s.ndim else np.concatenate([[t], x])


def _spacelike_parts(zeta) -> tuple[float, np.ndarray]:
    zeta = np.asarray(zeta, dtype=float)
    check_dimension(zeta.shape[-1] - 1)
    if causal_class(zeta) is not CausalClass.SPACE_LIKE:
        raise NotSpaceLike(f"covector {zeta!r} is not space-like")
    tau = float(zeta[0])
    xi = zeta[1:]
    if np.linalg.norm(xi) <= XI_TOL:
        raise DegenerateXi("spatial frequency part is numerically zero")
    return tau, xi


def theta_pm(zeta) -> tuple[np.ndarray, np.ndarray]:
    """Both unit directions theta with (1, theta) Euclid-orthogonal to zeta (n = 2).

    For a space-like zeta = (tau, xi) these are the only two solutions of
    |theta| = 1, tau + theta . xi = 0:

        theta_pm = (-tau xi^1 -/+ m xi^2, -tau xi^2 +/- m xi^1) / |xi|^2

    with m = sqrt(|xi|^2 - tau^2).
    """
    tau, xi = _spacelike_parts(zeta)
    if xi.shape[0] != 2:
        raise WrongDimension("theta_pm is the n = 2 branch formula")
    tp, tm = theta_pm_many(np.asarray(tau), xi[None, :])
    return tp[0], tm[0]


def theta_pm_many(tau: np.ndarray, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized branch formula for n = 2.

    tau has shape (...,) and xi shape (..., 2).  Inputs must already be
    space-like with |xi| above XI_TOL; no validation is performed here.
    """
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xi_sq = np.einsum("...i,...i->...", xi, xi)
    m = np.sqrt(np.maximum(xi_sq - tau * tau, 0.0))
    x1 = xi[..., 0]
    x2 = xi[..., 1]
    plus = np.stack([(-tau * x1 - m * x2), (-tau * x2 + m * x1)], axis=-1)
    minus = np.stack([(-tau * x1 + m * x2), (-tau * x2 - m * x1)], axis=-1)
    return plus / xi_sq[..., None], minus / xi_sq[..., None]


def spherical_theta(angles) -> np.ndarray:
    """Unit direction from chart angles.

    One angle a gives the n = 2 direction (sin a, cos a); two angles (a, b)
    give the n = 3 direction (sin a cos b, sin a sin b, cos a).  The chart
    origin points at the last coordinate axis in both cases.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.shape == (1,):
        a = angles[0]
        return np.array([np.sin(a), np.cos(a)])
    if angles.shape == (2,):
        a, b = angles
        return np.array([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)])
    raise WrongDimension("angles must have length 1 (n = 2) or 2 (n = 3)")


def chart_angles(theta: np.ndarray) -> np.ndarray:
    """Inverse of spherical_theta; batched over leading axes.

    Returns the single angle a in (-pi, pi] for n = 2 and (a, b) with
    a = arccos(theta^3) in [0, pi], b = atan2(theta^2, theta^1) for n = 3.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    if n == 2:
        return np.arctan2(theta[..., 0], theta[..., 1])[..., None]
    if n == 3:
        a = np.arccos(np.clip(theta[..., 2], -1.0, 1.0))
        b = np.arctan2(theta[..., 1], theta[..., 0])
        return np.stack([a, b], axis=-1)
    raise WrongDimension("theta must have dimension 2 or 3")


def circle_directions_many(tau: np.ndarray, xi: np.ndarray, count: int) -> np.ndarray:
    """count equispaced admissible directions per (tau, xi) pair for n = 3.

    tau has shape (...,), xi shape (..., 3); the result has shape
    (..., count, 3).  The admissible set {theta : |theta| = 1,
    theta . xi = -tau} is a circle of radius sqrt(1 - tau^2/|xi|^2) around
    -tau xi / |xi|^2.  The parametrization is seeded at the normalized
    projection of e_1 onto the circle's plane, falling back to e_2 when
    xi is parallel to e_1.  Inputs must be space-like; not validated here.
    """
    tau = np.asarray(tau, dtype=float)
    xi = np.asarray(xi, dtype=float)
    xi_norm = np.linalg.norm(xi, axis=-1)
    xi_hat = xi / xi_norm[..., None]
    c0 = -tau / xi_norm
    r = np.sqrt(np.maximum(1.0 - c0 * c0, 0.0))

    e1 = np.zeros_like(xi_hat)
    e1[..., 0] = 1.0
    seed = e1 - xi_hat[..., 0:1] * xi_hat
    seed_norm = np.linalg.norm(seed, axis=-1)
    degenerate = seed_norm < 1e-9
    if np.any(degenerate):
        e2 = np.zeros_like(xi_hat)
        e2[..., 1] = 1.0
        alt = e2 - xi_hat[..., 1:2] * xi_hat
        seed = np.where(degenerate[..., None], alt, seed)
        seed_norm = np.linalg.norm(seed, axis=-1)
    u = seed / seed_norm[..., None]
    v = np.cross(xi_hat, u)

    alphas = 2.0 * np.pi * np.arange(count) / count
    centered = (c0[..., None] * xi_hat)[..., None, :]
    ring = np.cos(alphas)[:, None] * u[..., None, :] + np.sin(alphas)[:, None] * v[..., None, :]
    return centered + r[..., None, None] * ring


def direction_set(zeta, count: int) -> np.ndarray:
    """Admissible unit directions for a space-like covector.

    For n = 2 the admissible set is the pair {theta_plus, theta_minus} and
    count must be 2.  For n = 3 it is a circle sampled at count equispaced
    points with a deterministic seed direction.  Raises EmptyAdmissibleSet
    when |tau| exceeds |xi| (time-like zeta fails the space-like gate first,
    so this triggers only through the guard below).
    """
    tau, xi = _spacelike_parts(zeta)
    if abs(tau) > np.linalg.norm(xi):
        raise EmptyAdmissibleSet("no unit direction satisfies theta . xi = -tau")
    n = xi.shape[0]
    if n == 2:
        if count != 2:
            raise ValueError("n = 2 admits exactly two directions; count must be 2")
        plus, minus = theta_pm(zeta)
        return np.stack([plus, minus])
    if count < 1:
        raise ValueError("count must be positive")
    return circle_directions_many(np.asarray(tau), xi[None, :], count)[0]


@dataclass
class PerturbationSet:
    """Four perturbed light-like rows (1, theta(.)) used for n = 3 systems."""

    a: float
    b: float
    rows: np.ndarray        # shape (4, 4)
    determinant: float      # closed-form value


def perturbation_rows(a: float, b: float) -> np.ndarray:
    """Rows (1, theta(a,b)), (1, theta(-a,b)), (1, theta(a,-b)), (1, theta(0,b))."""
    rows = np.empty((4, 4))
    for k, (aa, bb) in enumerate([(a, b), (-a, b), (a, -b), (0.0, b)]):
        rows[k, 0] = 1.0
        rows[k, 1:] = spherical_theta((aa, bb))
    return rows


def perturbation_determinant(a: float, b: float) -> float:
    """Closed form 4 sin^2(a) sin(b) cos(b) (1 - cos(a)) of det(perturbation_rows)."""
    return float(4.0 * np.sin(a) ** 2 * np.sin(b) * np.cos(b) * (1.0 - np.cos(a)))


def perturbation_matrix(a: float, b: float) -> PerturbationSet:
    """Perturbation system at chart angles (a, b).

    Raises SingularPerturbation when the closed-form determinant falls below
    SINGULAR_DET_TOL in magnitude (the loci where sin(a), sin(b), cos(b) or
    1 - cos(a) vanish).
    """
    det = perturbation_determinant(a, b)
    if abs(det) < SINGULAR_DET_TOL:
        raise SingularPerturbation(
            f"perturbation rows at (a, b) = ({a}, {b}) are singular (det = {det:.3e})"
        )
    return PerturbationSet(a=a, b=b, rows=perturbation_rows(a, b), determinant=det)


def boost_to_axis(zeta) -> np.ndarray:
    """Lorentz matrix L with L zeta = (0, ..., m, ...) on the designated axis.

    m = sqrt(|xi|^2 - tau^2) lands on spatial axis e^1 for n = 2 and e^2 for
    n = 3 (component index n - 1 of the (1+n)-vector).  L preserves the
    Minkowski form; it is assembled as a pure boost in the (t, axis) plane
    composed with a spatial reflection aligning xi with the axis.
    """
    tau, xi = _spacelike_parts(zeta)
    n = xi.shape[0]
    axis = n - 1                      # component index in the full (1+n)-vector
    xi_norm = float(np.linalg.norm(xi))
    xi_hat = xi / xi_norm

    target = np.zeros(n)
    target[axis - 1] = 1.0
    w = xi_hat - target
    if np.linalg.norm(w) < 1e-14:
        rot = np.eye(n)
    else:
        rot = np.eye(n) - 2.0 * np.outer(w, w) / float(w @ w)

    full_rot = np.eye(n + 1)
    full_rot[1:, 1:] = rot

    beta = tau / xi_norm
    gamma = 1.0 / np.sqrt(1.0 - beta * beta)
    boost = np.eye(n + 1)
    boost[0, 0] = gamma
    boost[0, axis] = -gamma * beta
    boost[axis, 0] = -gamma * beta
    boost[axis, axis] = gamma

    return boost @ full_rot
