"""Ray transform layer: quadrature rules, acquisitions, sinograms."""
import math

import numpy as np
import pytest

from lightray.errors import QuadratureBudgetExceeded
from lightray.fields import builtin_field, builtin_potential, gradient_field
from lightray.minkowski import LightRay
from lightray.raytransform import (
    Quadrature,
    acquisition_from_directions,
    acquisition_n2,
    acquisition_n3,
    directional_transform_exact,
    directional_transform_fd,
    lightray_transform,
    lightray_transform_with_error,
    make_sinogram,
    ray_interval,
    ray_intervals_batch,
)


def test_quadrature_validation():
    with pytest.raises(ValueError):
        Quadrature(rule="gauss")
    with pytest.raises(ValueError):
        Quadrature(abs_tol=0.0)
    with pytest.raises(ValueError):
        Quadrature(max_evals=4)


def test_ray_interval_hull_and_miss():
    f = builtin_field("gauss-t", 2, width=0.7, envelope_radius=1.5)
    lo, hi = ray_interval(f, LightRay(np.array([0.0, 0.0]), np.array([0.0, 1.0])))
    # a centred ray must cover at least the static ball
    assert lo <= -1.5 / math.sqrt(2.0) and hi >= 1.5 / math.sqrt(2.0)
    assert ray_interval(f, LightRay(np.array([5.0, 0.0]), np.array([0.0, 1.0]))) is None
    assert (
        lightray_transform(
            f, LightRay(np.array([5.0, 0.0]), np.array([0.0, 1.0])), Quadrature()
        )
        == 0.0
    )


def test_ray_intervals_batch_matches_scalar():
    f = builtin_field("gausspoly", 2, width=0.8, envelope_radius=2.0)
    rng = np.random.default_rng(2)
    theta = np.array([0.6, 0.8])
    xs = rng.uniform(-3.0, 3.0, size=(40, 2))
    lo, hi, hit = ray_intervals_batch(f.envelope, xs, theta)
    for k in range(40):
        got = ray_interval(f, LightRay(xs[k], theta))
        if got is None:
            assert not hit[k]
        else:
            assert hit[k]
            assert abs(lo[k] - got[0]) <= 1e-12 and abs(hi[k] - got[1]) <= 1e-12


def test_gaussian_ray_closed_form():
    # integrand along the ray is a single gaussian; compare with the full-line
    # closed form (envelope chosen wide enough that truncation is negligible)
    f = builtin_field("gauss-t", 2, width=0.7, envelope_radius=5.0)
    ray = LightRay(np.array([0.2, -0.1]), np.array([0.6, 0.8]))
    val, err = lightray_transform_with_error(f, ray, Quadrature(abs_tol=1e-10))
    d = 1.0 / 0.7**2
    a2, b1, c0 = 2.0, 2.0 * float(ray.x @ ray.theta), float(ray.x @ ray.x)
    closed = math.sqrt(math.pi / (d * a2)) * math.exp(-d * (c0 - b1**2 / (4.0 * a2)))
    assert err <= 1e-9
    assert abs(val - closed) <= 1e-8


def test_adaptive_and_simpson_agree():
    f = builtin_field("gausspoly", 2, width=0.6)
    rng = np.random.default_rng(9)
    for _ in range(10):
        ang = rng.uniform(-np.pi, np.pi)
        ray = LightRay(rng.uniform(-1.0, 1.0, 2), np.array([np.sin(ang), np.cos(ang)]))
        a = lightray_transform(f, ray, Quadrature(rule="adaptive", abs_tol=1e-10))
        s = lightray_transform(f, ray, Quadrature(rule="simpson", abs_tol=1e-10))
        assert abs(a - s) <= 5e-10


def test_budget_exhaustion_raises():
    f = builtin_field("gausspoly", 2, width=0.5)
    ray = LightRay(np.array([0.1, 0.2]), np.array([1.0, 0.0]))
    for rule in ("adaptive", "simpson"):
        with pytest.raises(QuadratureBudgetExceeded):
            lightray_transform(f, ray, Quadrature(rule=rule, abs_tol=1e-14, max_evals=9))


def test_acquisition_n2_layout():
    acq = acquisition_n2(
        (-2.0, -2.0), (0.5, 0.5), (8, 8), halfwidth=np.pi / 2.0, count=24
    )
    assert acq.n == 2
    assert acq.n_dirs == 46          # two patches share their endpoints
    assert np.abs(np.linalg.norm(acq.directions, axis=1) - 1.0).max() <= 1e-12
    pts = acq.x_points()
    assert pts.shape == (64, 2)
    assert np.allclose(pts[0], [-2.0, -2.0])
    assert np.allclose(pts[1], [-2.0, -1.5])  # last axis fastest
    one = acquisition_n2(
        (-2.0, -2.0), (0.5, 0.5), (8, 8), halfwidth=0.35, count=12,
        include_opposite=False,
    )
    assert one.n_dirs == 12


def test_acquisition_n2_opposite_patch_contains_reversed_directions():
    acq = acquisition_n2(
        (0.0, 0.0), (1.0, 1.0), (4, 4), halfwidth=np.pi / 2.0, count=9
    )
    dirs = acq.directions
    for th in dirs[:3]:
        dots = dirs @ (-th)
        assert dots.max() >= 1.0 - 1e-12


def test_acquisition_n3_layout():
    acq = acquisition_n3(
        (-2.0,) * 3, (0.5,) * 3, (8,) * 3, a_max=np.pi, a_count=5, b_count=6
    )
    assert acq.n == 3
    assert np.abs(np.linalg.norm(acq.directions, axis=1) - 1.0).max() <= 1e-12
    assert acq.x_points().shape == (512, 3)


def test_acquisition_from_directions():
    dirs = np.array([[0.0, 1.0], [1.0, 0.0]])
    acq = acquisition_from_directions((0.0, 0.0), (1.0, 1.0), (4, 4), dirs)
    assert acq.n_dirs == 2
    assert np.allclose(acq.directions, dirs)


def test_make_sinogram_values_and_mask():
    f = builtin_field("gausspoly", 2, width=0.7)
    acq = acquisition_n2(
        (-2.0, -2.0), (0.5, 0.5), (8, 8), halfwidth=np.pi / 2.0, count=6
    )
    q = Quadrature(rule="simpson", abs_tol=1e-8)
    full = make_sinogram(f, acq, q)
    assert full.values.shape == (8, 8, acq.n_dirs)
    assert full.max_error <= 1e-8
    # spot check one ray against the single-ray path
    v = lightray_transform(f, LightRay(acq.x_points()[11], acq.directions[3]), q)
    assert abs(full.values.reshape(64, -1)[11, 3] - v) <= 2e-8

    mask = np.ones((8, 8, acq.n_dirs), dtype=bool)
    mask[:, :, 0] = False
    part = make_sinogram(f, acq, q, ray_mask=mask)
    assert np.abs(part.values[:, :, 0]).max() == 0.0
    assert np.array_equal(part.values[:, :, 1:], full.values[:, :, 1:])
    assert part.ray_mask is not None


def test_make_sinogram_worker_invariance():
    f = builtin_field("gausspoly", 2, width=0.7)
    acq = acquisition_n2(
        (-2.0, -2.0), (0.5, 0.5), (8, 8), halfwidth=np.pi / 2.0, count=6
    )
    q = Quadrature(rule="simpson", abs_tol=1e-8)
    s1 = make_sinogram(f, acq, q, workers=1)
    s3 = make_sinogram(f, acq, q, workers=3)
    assert np.array_equal(s1.values, s3.values)
    assert s1.max_error == s3.max_error


def test_zero_field_sinogram_is_zero():
    f = builtin_field("zero", 2)
    acq = acquisition_n2(
        (-1.0, -1.0), (0.5, 0.5), (4, 4), halfwidth=np.pi / 2.0, count=4
    )
    sino = make_sinogram(f, acq, Quadrature(rule="simpson", abs_tol=1e-8))
    assert np.abs(sino.values).max() == 0.0
    assert sino.max_error == 0.0


def test_gauge_field_rays_vanish():
    # gradients integrate to zero along any ray through the decay region
    phi = builtin_potential("bump", 2)
    g = gradient_field(phi)
    rng = np.random.default_rng(23)
    q = Quadrature(abs_tol=1e-10)
    for _ in range(50):
        ang = rng.uniform(-np.pi, np.pi)
        ray = LightRay(rng.uniform(-2.0, 2.0, 2), np.array([np.sin(ang), np.cos(ang)]))
        assert abs(lightray_transform(g, ray, q)) <= 1e-8


def test_directional_identity_spot_checks():
    q = Quadrature(abs_tol=1e-10)
    rng = np.random.default_rng(31)
    for n in (2, 3):
        f = builtin_field("gausspoly", n, width=0.8)
        for _ in range(3):
            raw = rng.normal(size=n)
            theta = raw / np.linalg.norm(raw)
            ray = LightRay(rng.uniform(-0.5, 0.5, n), theta)
            v = rng.uniform(-1.0, 1.0, n)
            fd = directional_transform_fd(f, ray, v, q)
            exact = directional_transform_exact(f, ray, v, q)
            assert abs(fd - exact) / (1.0 + abs(exact)) <= 1e-6


def test_acquisition_parameter_errors():
    with pytest.raises(ValueError):
        acquisition_n2((-1.0, -1.0), (0.5, 0.5), (4, 4), halfwidth=1.0, count=1)
    with pytest.raises(ValueError):
        acquisition_n2((-1.0, -1.0), (0.5, 0.5), (4, 4), halfwidth=2.0, count=4)
