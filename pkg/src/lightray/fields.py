"""Vector fields on R^{1+n} with derivative rules and support envelopes.

Analytic fields are sums of Gaussian-polynomial terms, closed under exact
differentiation, with closed-form Fourier transforms available for oracle
use.  Sampled fields interpolate grid data and differentiate by central
differences.  Coordinates are always passed as a tuple of broadcastable
arrays (t, x1, ..., xn).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import WrongDimension

__all__ = [
    "AnalyticScalar",
    "CallableScalar",
    "GaussTerm",
    "SampledScalar",
    "ScalarPotential",
    "SupportEnvelope",
    "VectorField",
    "builtin_field",
    "builtin_field_names",
    "builtin_potential",
    "builtin_potential_names",
    "curl2",
    "d_form",
    "envelope_contains",
    "fd_partial",
    "gradient_field",
    "tilde_f",
]

FD_EPS_CBRT = float(np.finfo(float).eps) ** (1.0 / 3.0)

ENVELOPE_TOL = 1e-12


@dataclass(frozen=True)
class SupportEnvelope:
    """Region |x| <= speed * |t| + radius with 0 <= speed < 1.

    Every light ray leaves the envelope in finite parameter because the ray
    moves at spatial speed one while the envelope widens at a slower rate.
    """

    speed: float
    radius: float

    def __post_init__(self):
        if not 0.0 <= self.speed < 1.0:
            raise ValueError("envelope speed must lie in [0, 1)")
        if self.radius < 0.0:
            raise ValueError("envelope radius must be nonnegative")

    def contains(self, coords) -> np.ndarray:
        """Boolean membership mask, broadcast over the coordinate arrays."""
        t = np.asarray(coords[0], dtype=float)
        r_sq = None
        for c in coords[1:]:
            c = np.asarray(c, dtype=float)
            r_sq = c * c if r_sq is None else r_sq + c * c
        bound = self.speed * np.abs(t) + self.radius + ENVELOPE_TOL
        return np.sqrt(r_sq) <= bound

    def union(self, other: "SupportEnvelope") -> "SupportEnvelope":
        return SupportEnvelope(max(self.speed, other.speed), max(self.radius, other.radius))


def envelope_contains(env: SupportEnvelope, z) -> bool:
    z = np.asarray(z, dtype=float)
    return bool(env.contains(tuple(z)))


def fd_partial(eval_fn, coords, axis: int, step: float | None = None):
    """Central difference of eval_fn along one coordinate axis.

    With step None the step is cbrt(machine eps) * (1 + |z_axis|) per
    evaluation point, which balances truncation against rounding for the
    O(h^2) central rule.
    """
    coords = [np.asarray(c, dtype=float) for c in coords]
    z = coords[axis]
    h = FD_EPS_CBRT * (1.0 + np.abs(z)) if step is None else np.full_like(z, step, dtype=float)
    up = list(coords)
    dn = list(coords)
    up[axis] = z + h
    dn[axis] = z - h
    return (eval_fn(tuple(up)) - eval_fn(tuple(dn))) / (2.0 * h)


@dataclass(frozen=True)
class GaussTerm:
    """coef * prod_ax (z_ax - center_ax)^powers_ax * exp(-decay_ax (z_ax - center_ax)^2)."""

    coef: complex
    powers: tuple[int, ...]
    decay: tuple[float, ...]
    center: tuple[float, ...]


class AnalyticScalar:
    """Sum of Gaussian-polynomial terms on R^{1+n}.

    Closed under exact partial differentiation and carries the closed-form
    Fourier transform (convention integral of f(z) exp(-i z . zeta) dz with
    the Euclidean pairing).
    """

    def __init__(self, terms, dim: int):
        self.terms = tuple(terms)
        self.dim = int(dim)          # number of coordinates, 1 + n

    @classmethod
    def zero(cls, dim: int) -> "AnalyticScalar":
        return cls((), dim)

    @classmethod
    def monomial_gauss(cls, dim, coef=1.0, powers=None, decay=1.0, center=0.0):
        """Single-term constructor; scalar decay/center broadcast to all axes."""
        powers = tuple(powers) if powers is not None else (0,) * dim
        decay_t = tuple(decay) if np.ndim(decay) else (float(decay),) * dim
        center_t = tuple(center) if np.ndim(center) else (float(center),) * dim
        if not (len(powers) == len(decay_t) == len(center_t) == dim):
            raise WrongDimension("term tuples must all have length dim")
        coef = coef if isinstance(coef, complex) else float(coef)
        return cls((GaussTerm(coef, powers, decay_t, center_t),), dim)

    def eval(self, coords) -> np.ndarray:
        coords = [np.asarray(c, dtype=float) for c in coords]
        if len(coords) != self.dim:
            raise WrongDimension(f"expected {self.dim} coordinate arrays")
        shape = np.broadcast_shapes(*(c.shape for c in coords))
        dtype = np.result_type(np.float64, *(np.asarray(t.coef).dtype for t in self.terms))
        out = np.zeros(shape, dtype=dtype)
        gauss_cache: dict = {}
        shift_cache: dict = {}
        for term in self.terms:
            gkey = (term.decay, term.center)
            if gkey not in gauss_cache:
                expo = None
                for ax in range(self.dim):
                    u = coords[ax] - term.center[ax]
                    shift_cache[(ax, term.center[ax])] = u
                    contrib = term.decay[ax] * u * u
                    expo = contrib if expo is None else expo + contrib
                gauss_cache[gkey] = np.exp(-expo)
            val = term.coef * gauss_cache[gkey]
            for ax in range(self.dim):
                p = term.powers[ax]
                if p:
                    skey = (ax, term.center[ax])
                    if skey not in shift_cache:
                        shift_cache[skey] = coords[ax] - term.center[ax]
                    val = val * shift_cache[skey] ** p
            out = out + val
        return np.broadcast_to(out, shape) if out.shape != shape else out

    __call__ = eval

    def partial(self, axis: int) -> "AnalyticScalar":
        """Exact partial derivative along one coordinate axis."""
        new_terms = []
        for t in self.terms:
            p = t.powers[axis]
            if p:
                lowered = list(t.powers)
                lowered[axis] = p - 1
                new_terms.append(GaussTerm(t.coef * p, tuple(lowered), t.decay, t.center))
            raised = list(t.powers)
            raised[axis] = p + 1
            new_terms.append(
                GaussTerm(-2.0 * t.decay[axis] * t.coef, tuple(raised), t.decay, t.center)
            )
        return AnalyticScalar(new_terms, self.dim)

    @staticmethod
    def _ft_1d(p: int, a: float, c: float, w: np.ndarray) -> np.ndarray:
        """FT of z^p exp(-a z^2) shifted to center c, sampled at frequencies w."""
        q = Polynomial([1.0])
        for _ in range(p):
            q = q.deriv() + Polynomial([0.0, -1.0 / (2.0 * a)]) * q
        base = np.sqrt(np.pi / a) * np.exp(-w * w / (4.0 * a))
        out = (1j ** p) * q(w) * base
        if c:
            out = out * np.exp(-1j * c * w)
        return out

    def hat_axes(self, freqs) -> np.ndarray:
        """Fourier transform on a tensor-product frequency lattice.

        freqs is a tuple of 1-d arrays; the result has the corresponding
        mesh shape.  Each term factorizes into per-axis one-dimensional
        transforms, so the cost is a sum of outer products.
        """
        freqs = [np.asarray(f, dtype=float) for f in freqs]
        shape = tuple(f.size for f in freqs)
        out = np.zeros(shape, dtype=complex)
        for t in self.terms:
            factors = [
                self._ft_1d(t.powers[ax], t.decay[ax], t.center[ax], freqs[ax])
                for ax in range(self.dim)
            ]
            prod = factors[0].reshape((-1,) + (1,) * (self.dim - 1))
            for ax in range(1, self.dim):
                prod = prod * factors[ax].reshape((1,) * ax + (-1,) + (1,) * (self.dim - 1 - ax))
            out = out + t.coef * prod
        return out

    def hat_points(self, zeta: np.ndarray) -> np.ndarray:
        """Fourier transform at scattered covectors, batched over leading axes."""
        zeta = np.asarray(zeta, dtype=float)
        out = np.zeros(zeta.shape[:-1], dtype=complex)
        for t in self.terms:
            prod = None
            for ax in range(self.dim):
                f = self._ft_1d(t.powers[ax], t.decay[ax], t.center[ax], zeta[..., ax])
                prod = f if prod is None else prod * f
            out = out + t.coef * prod
        return out

    def __add__(self, other):
        if not isinstance(other, AnalyticScalar) or other.dim != self.dim:
            return NotImplemented
        return AnalyticScalar(self.terms + other.terms, self.dim)

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        neg = -other
        return self + neg

    def __mul__(self, scalar):
        if np.ndim(scalar):
            return NotImplemented
        scalar = scalar if isinstance(scalar, complex) else float(scalar)
        return AnalyticScalar(
            tuple(GaussTerm(t.coef * scalar, t.powers, t.decay, t.center) for t in self.terms),
            self.dim,
        )

    __rmul__ = __mul__


class CallableScalar:
    """Scalar rule wrapping a plain evaluator; derivatives fall back to FD."""

    def __init__(self, fn, dim: int, partial_fns=None, fd_step: float | None = None):
        self.fn = fn
        self.dim = int(dim)
        self.partial_fns = partial_fns
        self.fd_step = fd_step

    def eval(self, coords):
        return self.fn(coords)

    __call__ = eval

    def partial(self, axis: int) -> "CallableScalar":
        if self.partial_fns is not None:
            return self.partial_fns[axis]
        step = self.fd_step

        def diff(coords, _axis=axis, _step=step):
            return fd_partial(self.fn, coords, _axis, _step)

        return CallableScalar(diff, self.dim, fd_step=step)


class SampledScalar(CallableScalar):
    """Multilinear interpolant of grid samples, zero outside the grid box.

    Derivatives use central differences with the grid spacing as step, the
    finest scale the data can support.
    """

    def __init__(self, origin, spacing, values: np.ndarray):
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = np.asarray(spacing, dtype=float)
        self.values = np.asarray(values)
        dim = self.values.ndim
        super().__init__(self._interp, dim, fd_step=float(self.spacing.min()))

    def _interp(self, coords):
        coords = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*(c.shape for c in coords))
        idx = []
        frac = []
        inside = np.ones(shape, dtype=bool)
        for ax in range(self.dim):
            rel = (np.broadcast_to(coords[ax], shape) - self.origin[ax]) / self.spacing[ax]
            i0 = np.floor(rel).astype(int)
            inside &= (i0 >= 0) & (i0 <= self.values.shape[ax] - 2)
            i0 = np.clip(i0, 0, self.values.shape[ax] - 2)
            idx.append(i0)
            frac.append(rel - i0)
        out = np.zeros(shape, dtype=self.values.dtype)
        for corner in range(1 << self.dim):
            weight = np.ones(shape)
            gather = []
            for ax in range(self.dim):
                if corner >> ax & 1:
                    weight = weight * frac[ax]
                    gather.append(idx[ax] + 1)
                else:
                    weight = weight * (1.0 - frac[ax])
                    gather.append(idx[ax])
            out = out + weight * self.values[tuple(gather)]
        return np.where(inside, out, 0.0)


@dataclass
class ScalarPotential:
    """Decaying scalar whose spacetime gradient is a pure-gauge field."""

    rule: AnalyticScalar | CallableScalar
    envelope: SupportEnvelope | None = None
    name: str = ""


@dataclass
class VectorField:
    """Covector field f = (f_0, ..., f_n) with per-component scalar rules."""

    components: tuple
    envelope: SupportEnvelope | None = None
    name: str = ""

    def __post_init__(self):
        dims = {c.dim for c in self.components}
        if len(dims) != 1 or len(self.components) != next(iter(dims)):
            raise WrongDimension("need 1+n components of matching dimension")
        self._partials = {}

    @property
    def n(self) -> int:
        return len(self.components) - 1

    @property
    def analytic(self) -> bool:
        return all(isinstance(c, AnalyticScalar) for c in self.components)

    def component_partial(self, i: int, axis: int):
        key = (i, axis)
        if key not in self._partials:
            self._partials[key] = self.components[i].partial(axis)
        return self._partials[key]

    def eval_grid(self, coords) -> np.ndarray:
        """All components over broadcast coordinates; leading axis indexes components.

        Points outside the support envelope evaluate to zero.
        """
        parts = [np.asarray(c.eval(coords)) for c in self.components]
        shape = np.broadcast_shapes(*(p.shape for p in parts))
        vals = np.stack([np.broadcast_to(p, shape) for p in parts])
        if self.envelope is not None:
            mask = self.envelope.contains(coords)
            vals = vals * mask
        return vals

    def eval(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.eval_grid(tuple(z)).reshape(len(self.components))

    def __add__(self, other: "VectorField") -> "VectorField":
        if len(other.components) != len(self.components):
            raise WrongDimension("cannot add fields of different dimension")
        comps = tuple(a + b for a, b in zip(self.components, other.components))
        if self.envelope is None or other.envelope is None:
            env = None
        else:
            env = self.envelope.union(other.envelope)
        return VectorField(comps, env, name=f"{self.name}+{other.name}")


def d_form(f: VectorField, z) -> np.ndarray:
    """Antisymmetric matrix f_ij = d_j f_i - d_i f_j at a single event.

    Events outside the support envelope map to the zero matrix, matching
    the clipped evaluation of the field itself.
    """
    z = np.asarray(z, dtype=float)
    d = len(f.components)
    if f.envelope is not None and not envelope_contains(f.envelope, z):
        return np.zeros((d, d))
    coords = tuple(z)
    cells = [
        [np.asarray(f.component_partial(i, j).eval(coords)).reshape(()) for j in range(d)]
        for i in range(d)
    ]
    grads = np.array(cells)    # grads[i, j] = d_j f_i
    return grads - grads.T


def tilde_f(f: VectorField, z, v) -> np.ndarray:
    """Transported field driving the directional-derivative identity.

    For a spatial perturbation v the components are
    tilde_i = sum_{j=1..n} f_ij v^j for every i (the diagonal term vanishes
    by antisymmetry, which subsumes the j != i restriction for i >= 1).
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (len(f.components) - 1,):
        raise WrongDimension("v must be a spatial vector of length n")
    D = d_form(f, z)
    return D[:, 1:] @ v


def curl2(f: VectorField, z) -> np.ndarray:
    """Curl vector (c_0, c_1, c_2) of an n = 2 field.

    c_0 = d_1 f_2 - d_2 f_1, c_1 = d_2 f_0 - d_t f_2, c_2 = d_t f_1 - d_1 f_0.
    """
    if f.n != 2:
        raise WrongDimension("curl2 requires n = 2")
    D = d_form(f, z)
    return np.array([D[2, 1], D[0, 2], D[1, 0]])


def d_form_rules(f: VectorField) -> dict:
    """Scalar rules for each independent d-form component, keyed by (i, j), i < j."""
    d = len(f.components)
    rules = {}
    for i in range(d):
        for j in range(i + 1, d):
            rules[(i, j)] = _sub_rules(f.component_partial(i, j), f.component_partial(j, i))
    return rules


def curl2_rules(f: VectorField) -> tuple:
    """Scalar rules for (c_0, c_1, c_2) of an n = 2 field."""
    if f.n != 2:
        raise WrongDimension("curl2 requires n = 2")
    r = d_form_rules(f)

    def neg(rule):
        return _sub_rules(_zero_like(rule), rule)

    return (neg(r[(1, 2)]), r[(0, 2)], neg(r[(0, 1)]))


def _zero_like(rule):
    if isinstance(rule, AnalyticScalar):
        return AnalyticScalar.zero(rule.dim)
    return CallableScalar(lambda coords: np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords))), rule.dim)


def _sub_rules(a, b):
    if isinstance(a, AnalyticScalar) and isinstance(b, AnalyticScalar):
        return a - b
    return CallableScalar(lambda coords: a.eval(coords) - b.eval(coords), a.dim)


def gradient_field(phi: ScalarPotential) -> VectorField:
    """Spacetime gradient d phi as a vector field; lies in the transform kernel."""
    rule = phi.rule
    comps = tuple(rule.partial(ax) for ax in range(rule.dim))
    return VectorField(comps, envelope=phi.envelope, name=f"d({phi.name})" if phi.name else "dphi")


# --- built-in library --------------------------------------------------------
#
# Envelope radii are chosen so the Gaussian magnitude at the envelope
# boundary stays below ~1e-12, keeping ray integrals of gradient fields at
# the gauge-kernel floor after truncation.


def _envelope_for(decay_min: float, center_sp: float, speed: float = 0.0) -> SupportEnvelope:
    return SupportEnvelope(speed, center_sp + float(np.sqrt(34.0 / decay_min)))


def _gauss(dim, coef=1.0, powers=None, width=1.0, center=0.0):
    decay = 1.0 / (width * width)
    return AnalyticScalar.monomial_gauss(dim, coef=coef, powers=powers, decay=decay, center=center)


def builtin_field_names() -> tuple[str, ...]:
    return ("zero", "gauss-t", "gausspoly", "rotor")


def builtin_field(
    name: str,
    n: int,
    width: float = 1.0,
    center=None,
    amplitude: float = 1.0,
    envelope_radius: float | None = None,
) -> VectorField:
    """Construct a named analytic test field on R^{1+n}.

    zero      -- all components vanish.
    gauss-t   -- Gaussian bump times the dt covector.
    gausspoly -- Gaussian times low-degree polynomials in every component.
    rotor     -- spatial rotation profile with localized, sign-rich curl.

    width rescales the Gaussian; center shifts all coordinates; amplitude
    multiplies every component.  envelope_radius overrides the default
    deep-truncation support radius: a snug radius trades a larger clip at
    the envelope boundary for a narrower spectrum, which balances the two
    error sources on coarse grids.
    """
    if n not in (2, 3):
        raise WrongDimension("n must be 2 or 3")
    dim = n + 1
    c = tuple(center) if center is not None else (0.0,) * dim
    if len(c) != dim:
        raise WrongDimension("center must have length 1+n")
    a = amplitude

    def mono(coef, powers):
        return _gauss(dim, coef=coef * a, powers=powers, width=width, center=c)

    zero = AnalyticScalar.zero(dim)
    if name == "zero":
        comps = (zero,) * dim
        env = SupportEnvelope(0.0, 1.0)
    elif name == "gauss-t":
        comps = (mono(1.0, (0,) * dim),) + (zero,) * n
        env = _envelope_for(1.0 / width**2, _sp_norm(c))
    elif name == "gausspoly":
        if n == 2:
            comps = (
                mono(1.0, (0, 1, 0)),
                mono(1.0, (1, 0, 0)) + mono(-1.0, (0, 0, 1)),
                mono(1.0, (0, 1, 1)),
            )
        else:
            comps = (
                mono(1.0, (0, 1, 0, 0)),
                mono(1.0, (1, 0, 0, 0)) + mono(-1.0, (0, 0, 1, 0)),
                mono(1.0, (0, 1, 0, 1)),
                mono(1.0, (0, 0, 1, 0)),
            )
        env = _envelope_for(1.0 / width**2, _sp_norm(c))
    elif name == "rotor":
        if n == 2:
            comps = (zero, mono(-1.0, (0, 0, 1)), mono(1.0, (0, 1, 0)))
        else:
            comps = (zero, mono(-1.0, (0, 0, 1, 0)), mono(1.0, (0, 1, 0, 0)), zero)
        env = _envelope_for(1.0 / width**2, _sp_norm(c))
    else:
        raise KeyError(f"unknown builtin field {name!r}; see builtin_field_names()")
    if envelope_radius is not None:
        env = SupportEnvelope(0.0, float(envelope_radius))
    return VectorField(comps, envelope=env, name=name)


def _sp_norm(center) -> float:
    return float(np.linalg.norm(np.asarray(center, dtype=float)[1:]))


def builtin_potential_names() -> tuple[str, ...]:
    return ("bump", "wide", "tilted", "offset", "aniso")


def builtin_potential(name: str, n: int) -> ScalarPotential:
    """Five decaying scalar potentials used for gauge-kernel checks."""
    if n not in (2, 3):
        raise WrongDimension("n must be 2 or 3")
    dim = n + 1
    if name == "bump":
        rule = _gauss(dim)
        env = _envelope_for(1.0, 0.0)
    elif name == "wide":
        rule = _gauss(dim, width=np.sqrt(2.0))
        env = _envelope_for(0.5, 0.0)
    elif name == "tilted":
        rule = _gauss(dim, powers=(1, 1) + (0,) * (dim - 2))
        env = _envelope_for(1.0, 0.0)
    elif name == "offset":
        c = (0.4, -0.3, 0.2, 0.1)[:dim]
        rule = _gauss(dim, center=c)
        env = _envelope_for(1.0, _sp_norm(c))
    elif name == "aniso":
        decay = (1.5, 0.75, 1.25, 1.0)[:dim]
        rule = AnalyticScalar.monomial_gauss(dim, decay=decay)
        env = _envelope_for(0.75, 0.0)
    else:
        raise KeyError(f"unknown builtin potential {name!r}; see builtin_potential_names()")
    return ScalarPotential(rule, env, name=name)
