"""Geometry layer: causal classes, admissible directions, perturbations, boosts."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import spacelike_covectors
from lightray.errors import (
    EmptyAdmissibleSet,
    NotSpaceLike,
    SingularPerturbation,
    WrongDimension,
)
from lightray.minkowski import (
    CausalClass,
    LightRay,
    boost_to_axis,
    causal_class,
    chart_angles,
    circle_directions_many,
    direction_set,
    minkowski_form,
    perturbation_determinant,
    perturbation_matrix,
    perturbation_rows,
    ray_point,
    spherical_theta,
    theta_pm,
    theta_pm_many,
)


def test_minkowski_form_signature():
    assert minkowski_form([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]) == -1.0
    assert minkowski_form([0.0, 1.0, 0.0], [0.0, 1.0, 0.0]) == 1.0
    assert minkowski_form([1.0, 1.0, 0.0], [1.0, 1.0, 0.0]) == 0.0
    # bilinear cross term
    assert minkowski_form([2.0, 1.0, 3.0], [1.0, -1.0, 2.0]) == -2.0 - 1.0 + 6.0


def test_causal_class_examples():
    assert causal_class([1.0, 0.2, 0.1]) is CausalClass.TIME_LIKE
    assert causal_class([0.1, 1.0, 0.0]) is CausalClass.SPACE_LIKE
    assert causal_class([1.0, 0.6, 0.8]) is CausalClass.LIGHT_LIKE
    # within 1e-12 of the cone still counts as light-like
    assert causal_class([1.0, 1.0 + 5e-13, 0.0]) is CausalClass.LIGHT_LIKE


def test_ray_tangent_is_light_like():
    rng = np.random.default_rng(3)
    for n in (2, 3):
        for _ in range(20):
            v = rng.normal(size=n)
            theta = v / np.linalg.norm(v)
            assert causal_class(np.concatenate([[1.0], theta])) is CausalClass.LIGHT_LIKE


def test_light_ray_validation():
    with pytest.raises(ValueError):
        LightRay(np.zeros(2), np.array([0.5, 0.5]))
    with pytest.raises(WrongDimension):
        LightRay(np.zeros(4), np.concatenate([[1.0], np.zeros(3)]))
    with pytest.raises(WrongDimension):
        LightRay(np.zeros(2), np.array([0.0, 0.0, 1.0]))


def test_ray_point_batched():
    ray = LightRay(np.array([1.0, -2.0]), np.array([0.0, 1.0]))
    z = ray_point(ray, 0.5)
    assert np.allclose(z, [0.5, 1.0, -1.5])
    s = np.array([0.0, 1.0, 2.0])
    zs = ray_point(ray, s)
    assert zs.shape == (3, 3)
    assert np.allclose(zs[:, 0], s)
    assert np.allclose(zs[2], [2.0, 1.0, 0.0])


def test_theta_pm_constraints_bulk():
    rng = np.random.default_rng(11)
    zetas = spacelike_covectors(rng, 2, 1000)
    plus, minus = theta_pm_many(zetas[:, 0], zetas[:, 1:])
    for th in (plus, minus):
        assert np.abs(np.linalg.norm(th, axis=1) - 1.0).max() <= 1e-12
        pair = zetas[:, 0] + np.einsum("ri,ri->r", th, zetas[:, 1:])
        assert np.abs(pair).max() <= 1e-12
    # the two branches are genuinely different solutions
    assert np.linalg.norm(plus - minus, axis=1).min() > 1e-8


def test_theta_pm_scalar_matches_many():
    zeta = np.array([0.3, 1.2, -0.5])
    plus, minus = theta_pm(zeta)
    pm, mm = theta_pm_many(zeta[0], zeta[None, 1:])
    assert np.allclose(plus, pm[0]) and np.allclose(minus, mm[0])


def test_theta_pm_rejects_bad_input():
    with pytest.raises(NotSpaceLike):
        theta_pm([1.0, 0.3, 0.1])
    with pytest.raises(WrongDimension):
        theta_pm([0.1, 1.0, 0.0, 0.0])


@given(st.floats(-np.pi + 1e-6, np.pi))
def test_chart_roundtrip_n2(a):
    back = chart_angles(spherical_theta(np.array([a])))
    assert abs(back[0] - a) <= 1e-12


@given(st.floats(1e-3, np.pi - 1e-3), st.floats(-np.pi + 1e-6, np.pi))
def test_chart_roundtrip_n3(a, b):
    th = spherical_theta(np.array([a, b]))
    assert abs(np.linalg.norm(th) - 1.0) <= 1e-12
    aa, bb = chart_angles(th)
    assert abs(aa - a) <= 1e-9
    assert abs(np.angle(np.exp(1j * (bb - b)))) <= 1e-9


def test_direction_set_n2_is_branch_pair():
    zeta = np.array([0.4, 0.8, -1.1])
    both = direction_set(zeta, 2)
    plus, minus = theta_pm(zeta)
    assert np.allclose(both[0], plus) and np.allclose(both[1], minus)
    with pytest.raises(ValueError):
        direction_set(zeta, 3)


def test_direction_set_n3_circle():
    zeta = np.array([0.5, 1.0, 0.3, -0.7])
    dirs = direction_set(zeta, 8)
    assert dirs.shape == (8, 3)
    assert np.abs(np.linalg.norm(dirs, axis=1) - 1.0).max() <= 1e-12
    assert np.abs(zeta[0] + dirs @ zeta[1:]).max() <= 1e-12
    # equispaced ring: consecutive chords have equal length
    chords = np.linalg.norm(np.roll(dirs, -1, axis=0) - dirs, axis=1)
    assert np.ptp(chords) <= 1e-12


def test_circle_directions_axis_aligned_xi():
    # xi parallel to e_1 exercises the seed fallback
    dirs = circle_directions_many(np.array(0.2), np.array([[1.0, 0.0, 0.0]]), 6)[0]
    assert np.abs(np.linalg.norm(dirs, axis=1) - 1.0).max() <= 1e-12
    assert np.abs(0.2 + dirs @ np.array([1.0, 0.0, 0.0])).max() <= 1e-12


def test_perturbation_determinant_matches_rows():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = rng.uniform(-np.pi, np.pi)
        b = rng.uniform(-np.pi, np.pi)
        got = np.linalg.det(perturbation_rows(a, b))
        assert abs(got - perturbation_determinant(a, b)) <= 1e-12


def test_perturbation_singular_loci():
    for a, b in [(0.0, 0.7), (0.9, 0.0), (0.9, np.pi / 2), (0.9, -np.pi / 2)]:
        assert abs(perturbation_determinant(a, b)) <= 1e-15
        with pytest.raises(SingularPerturbation):
            perturbation_matrix(a, b)
    ps = perturbation_matrix(0.9, 0.7)
    assert ps.rows.shape == (4, 4)
    assert abs(np.linalg.det(ps.rows) - ps.determinant) <= 1e-12


def test_boost_preserves_form_and_aligns():
    rng = np.random.default_rng(17)
    for n in (2, 3):
        G = np.diag([-1.0] + [1.0] * n)
        zetas = spacelike_covectors(rng, n, 200)
        for zeta in zetas:
            L = boost_to_axis(zeta)
            assert np.abs(L.T @ G @ L - G).max() <= 1e-10
            mapped = L @ zeta
            m = np.sqrt(zeta[1:] @ zeta[1:] - zeta[0] ** 2)
            axis = n - 1
            off = np.delete(mapped, axis)
            assert np.abs(off).max() <= 1e-10
            assert abs(mapped[axis] - m) <= 1e-10


def test_boost_rejects_nonspacelike():
    with pytest.raises(NotSpaceLike):
        boost_to_axis([1.0, 0.1, 0.0])


def test_direction_set_requires_spacelike():
    with pytest.raises(NotSpaceLike):
        direction_set([2.0, 1.0, 0.0], 2)


def test_empty_admissible_set_unreachable_via_gate():
    # |tau| > |xi| always fails the space-like gate first
    with pytest.raises((NotSpaceLike, EmptyAdmissibleSet)):
        direction_set([1.5, 1.0, 0.0], 2)
