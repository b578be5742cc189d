"""Field layer: analytic scalars, derivative rules, envelopes, built-ins."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lightray.errors import WrongDimension
from lightray.fields import (
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
    d_form_rules,
    envelope_contains,
    fd_partial,
    gradient_field,
    tilde_f,
)

coord = st.floats(-1.5, 1.5)


def test_gaussian_hat_closed_form():
    # hat g(zeta) = A (pi/d)^{dim/2} exp(-|zeta|^2/(4d)) exp(-i c.zeta)
    A, d = 0.7, 0.9
    c = np.array([0.2, -0.4, 0.3])
    g = AnalyticScalar.monomial_gauss(3, coef=A, decay=d, center=tuple(c))
    zeta = np.array([[0.0, 0.0, 0.0], [1.0, -0.5, 0.25], [-2.0, 0.3, 1.4]])
    want = (
        A
        * (np.pi / d) ** 1.5
        * np.exp(-np.sum(zeta**2, axis=1) / (4.0 * d))
        * np.exp(-1j * zeta @ c)
    )
    got = g.hat_points(zeta)
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_monomial_hat_against_quadrature():
    # dual route: dense trapezoid integral of f(z) exp(-i z.zeta) in 1+1 dims
    g = AnalyticScalar.monomial_gauss(2, coef=1.3, powers=(1, 2), decay=1.1)
    zeta = np.array([0.7, -0.4])
    ax = np.linspace(-8.0, 8.0, 1601)
    t, x = np.meshgrid(ax, ax, indexing="ij")
    vals = g.eval((t, x))
    phase = np.exp(-1j * (zeta[0] * t + zeta[1] * x))
    step = ax[1] - ax[0]
    ref = np.trapezoid(np.trapezoid(vals * phase, dx=step), dx=step)
    got = g.hat_points(zeta[None])[0]
    assert abs(got - ref) <= 1e-8


@given(coord, coord, coord)
@settings(max_examples=40)
def test_partial_matches_fd(t, x, y):
    g = AnalyticScalar.monomial_gauss(
        3, coef=0.8, powers=(0, 2, 1), decay=0.6, center=(0.1, -0.2, 0.05)
    )
    z = np.array([t, x, y])
    for ax in range(3):
        assert abs(g.partial(ax).eval(z) - fd_partial(g.eval, z, ax)) <= 1e-7


def test_scalar_sum_evals_pointwise():
    a = AnalyticScalar.monomial_gauss(3, coef=1.0, powers=(1, 0, 0), decay=0.5)
    b = AnalyticScalar.monomial_gauss(3, coef=-0.3, powers=(0, 0, 2), decay=0.8)
    z = np.array([0.4, -0.6, 0.2])
    assert abs((a + b).eval(z) - (a.eval(z) + b.eval(z))) <= 1e-15


def test_component_partial_matches_fd():
    f = builtin_field("gausspoly", 2, width=0.7)
    z = np.array([0.2, -0.3, 0.5])
    for i in range(3):
        for ax in range(3):
            got = f.component_partial(i, ax).eval(z)
            want = fd_partial(f.components[i].eval, z, ax)
            assert abs(got - want) <= 1e-7


def test_d_form_is_antisymmetric_gradient_curl():
    f = builtin_field("gausspoly", 2, width=0.9)
    z = np.array([0.15, 0.4, -0.35])
    M = d_form(f, z)
    assert np.abs(M + M.T).max() <= 1e-14
    for i in range(3):
        for j in range(3):
            want = f.component_partial(i, j).eval(z) - f.component_partial(j, i).eval(z)
            assert abs(M[i, j] - want) <= 1e-12


def test_d_form_rules_match_pointwise():
    f = builtin_field("gausspoly", 3, width=0.8)
    rules = d_form_rules(f)
    z = np.array([0.1, -0.2, 0.3, 0.25])
    M = d_form(f, z)
    for (i, j), rule in rules.items():
        assert abs(rule.eval(z) - M[i, j]) <= 1e-12


def test_curl2_matches_d_form_mapping():
    f = builtin_field("gausspoly", 2, width=0.75)
    z = np.array([-0.1, 0.3, 0.2])
    M = d_form(f, z)
    c = curl2(f, z)
    assert np.allclose(c, [-M[1, 2], M[0, 2], -M[0, 1]], atol=1e-14)


def test_gradient_field_components():
    phi = builtin_potential("tilted", 2)
    g = gradient_field(phi)
    assert g.analytic
    z = np.array([0.3, -0.4, 0.1])
    for ax in range(3):
        assert abs(g.eval(z)[ax] - fd_partial(phi.rule.eval, z, ax)) <= 1e-7
    # gradients have identically vanishing d-form
    assert np.abs(d_form(g, z)).max() <= 1e-12


def test_builtin_potential_inventory():
    names = builtin_potential_names()
    assert len(names) == 5
    for name in names:
        for n in (2, 3):
            phi = builtin_potential(name, n)
            assert phi.envelope is not None and phi.envelope.radius > 0
    with pytest.raises(KeyError):
        builtin_potential("nope", 2)


def test_builtin_field_inventory_and_errors():
    assert set(builtin_field_names()) == {"zero", "gauss-t", "gausspoly", "rotor"}
    with pytest.raises(KeyError):
        builtin_field("nope", 2)
    with pytest.raises(WrongDimension):
        builtin_field("gausspoly", 4)
    with pytest.raises(WrongDimension):
        builtin_field("gausspoly", 2, center=(0.0, 0.0))


def test_zero_field():
    f = builtin_field("zero", 3)
    z = np.array([0.3, 0.1, -0.2, 0.4])
    assert np.abs(f.eval(z)).max() == 0.0
    assert np.abs(d_form(f, z)).max() == 0.0


def test_center_and_amplitude():
    c = (0.2, -0.3, 0.1)
    f0 = builtin_field("gausspoly", 2, width=0.8)
    fc = builtin_field("gausspoly", 2, width=0.8, center=c, amplitude=2.5)
    z = np.array([0.4, 0.1, 0.3])
    assert np.allclose(fc.eval(z), 2.5 * f0.eval(z - np.array(c)), atol=1e-13)


def test_envelope_clips_to_zero():
    f = builtin_field("gausspoly", 2, width=0.8, envelope_radius=1.0)
    inside = np.array([0.0, 0.5, 0.5])
    outside = np.array([0.0, 0.9, 0.9])
    assert np.abs(f.eval(inside)).max() > 0.0
    assert np.abs(f.eval(outside)).max() == 0.0
    assert envelope_contains(f.envelope, inside)
    assert not envelope_contains(f.envelope, outside)


def test_envelope_speed_grows_with_time():
    env = SupportEnvelope(0.5, 1.0)
    assert envelope_contains(env, np.array([2.0, 1.8, 0.0]))
    assert not envelope_contains(env, np.array([0.0, 1.8, 0.0]))


def test_rotor_curl_is_localized():
    f = builtin_field("rotor", 2, width=0.5, envelope_radius=1.9)
    # interior curl is nonzero, beyond the envelope it vanishes identically
    assert np.abs(curl2(f, np.array([0.0, 0.1, 0.0]))).max() > 0.1
    assert np.abs(f.eval(np.array([0.0, 2.5, 0.0]))).max() == 0.0


def test_sampled_scalar_nodes_and_linear_interp():
    vals = np.fromfunction(
        lambda i, j: 2.0 * i - 3.0 * j, (6, 6), dtype=float
    )
    s = SampledScalar((0.0, 0.0), (0.5, 0.5), vals)
    assert abs(s.eval(np.array([1.0, 1.5])) - (2.0 * 2 - 3.0 * 3)) <= 1e-12
    # multilinear interpolation reproduces affine data between nodes
    assert abs(s.eval(np.array([0.75, 1.25])) - (2.0 * 1.5 - 3.0 * 2.5)) <= 1e-12


def test_sampled_field_is_not_analytic():
    vals = np.zeros((4, 4, 4))
    comp = SampledScalar((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), vals)
    f = VectorField((comp, comp, comp), envelope=SupportEnvelope(0.0, 2.0))
    assert not f.analytic


def test_callable_scalar_fd_fallback():
    g = CallableScalar(lambda c: np.sin(c[0]) * c[1], 2)
    z = np.array([0.5, 0.8])
    want = math.cos(0.5) * 0.8
    assert abs(fd_partial(g.eval, z, 0) - want) <= 1e-6


def test_tilde_f_linear_in_direction():
    f = builtin_field("gausspoly", 2, width=0.7)
    z = np.array([0.2, 0.1, -0.3])
    v1 = np.array([0.4, -0.6])
    v2 = np.array([-0.2, 0.5])
    lhs = tilde_f(f, z, 2.0 * v1 + v2)
    rhs = 2.0 * tilde_f(f, z, v1) + tilde_f(f, z, v2)
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_vector_field_validation():
    comp = AnalyticScalar.zero(3)
    with pytest.raises(WrongDimension):
        VectorField((comp, comp), envelope=SupportEnvelope(0.0, 1.0))


def test_scalar_potential_carries_envelope():
    rule = AnalyticScalar.monomial_gauss(3, coef=0.8, decay=1.0)
    phi = ScalarPotential(rule, SupportEnvelope(0.0, 2.0), name="gbump")
    assert phi.name == "gbump"
    g = gradient_field(phi)
    assert g.envelope.radius == 2.0
