import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuralgi import geometry as geo
from neuralgi.geometry import (AreaTable, BvhError, Ray, build_bvh,
                               intersect_rays, intersect_rays_brute,
                               make_frame, sample_direction_uniform,
                               sample_triangle_points, triangle_areas)


def random_tris(rng, n, scale=1.0):
    v0 = rng.uniform(-scale, scale, (n, 3))
    v1 = v0 + rng.uniform(-0.5, 0.5, (n, 3)) * scale
    v2 = v0 + rng.uniform(-0.5, 0.5, (n, 3)) * scale
    return v0, v1, v2


def test_ray_validation():
    r = Ray(np.zeros(3), np.array([0.0, 0.0, 2.0]))
    assert np.allclose(r.direction, [0, 0, 1])  # renormalized
    with pytest.raises(ValueError):
        Ray(np.zeros(3), np.array([0, 0, 1.0]), t_min=-1.0)
    with pytest.raises(ValueError):
        Ray(np.zeros(3), np.array([0, 0, 1.0]), t_min=2.0, t_max=1.0)


def test_single_triangle_hit_oracle():
    # unit right triangle in z=0 plane; ray straight down onto (0.25, 0.25)
    v0 = np.array([[0.0, 0.0, 0.0]])
    v1 = np.array([[1.0, 0.0, 0.0]])
    v2 = np.array([[0.0, 1.0, 0.0]])
    bvh = build_bvh(v0, v1, v2)
    o = np.array([[0.25, 0.25, 3.0]])
    d = np.array([[0.0, 0.0, -1.0]])
    tri, t = intersect_rays(bvh, v0, v1 - v0, v2 - v0, o, d, 0.0, np.inf)
    assert tri[0] == 0
    assert t[0] == pytest.approx(3.0, abs=1e-12)
    # miss outside the legs
    o2 = np.array([[0.9, 0.9, 3.0]])
    tri2, _ = intersect_rays(bvh, v0, v1 - v0, v2 - v0, o2, d, 0.0, np.inf)
    assert tri2[0] == -1


def test_bvh_empty_raises():
    z = np.zeros((0, 3))
    with pytest.raises(BvhError):
        build_bvh(z, z, z)


def test_bvh_matches_brute_force_bulk():
    # oracle: exhaustive intersection over every triangle
    rng = np.random.default_rng(0)
    v0, v1, v2 = random_tris(rng, 500)
    e1, e2 = v1 - v0, v2 - v0
    bvh = build_bvh(v0, v1, v2)
    o = rng.uniform(-2, 2, (5000, 3))
    d = rng.normal(size=(5000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    tri_a, t_a = intersect_rays(bvh, v0, e1, e2, o, d, 0.0, np.inf)
    tri_b, t_b = intersect_rays_brute(v0, e1, e2, o, d, 0.0, np.inf)
    np.testing.assert_array_equal(tri_a, tri_b)
    np.testing.assert_array_equal(t_a, t_b)
    assert (tri_a >= 0).any()


def test_bvh_axis_aligned_rays():
    # zero direction components exercise the slab special case
    rng = np.random.default_rng(3)
    v0, v1, v2 = random_tris(rng, 64)
    e1, e2 = v1 - v0, v2 - v0
    bvh = build_bvh(v0, v1, v2)
    n = 600
    o = rng.uniform(-2, 2, (n, 3))
    d = np.zeros((n, 3))
    d[np.arange(n), rng.integers(0, 3, n)] = rng.choice([-1.0, 1.0], n)
    tri_a, t_a = intersect_rays(bvh, v0, e1, e2, o, d, 0.0, np.inf)
    tri_b, t_b = intersect_rays_brute(v0, e1, e2, o, d, 0.0, np.inf)
    np.testing.assert_array_equal(tri_a, tri_b)
    np.testing.assert_array_equal(t_a, t_b)


@settings(deadline=None, max_examples=25)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 40))
def test_bvh_brute_property(seed, n):
    rng = np.random.default_rng(seed)
    v0, v1, v2 = random_tris(rng, n)
    e1, e2 = v1 - v0, v2 - v0
    bvh = build_bvh(v0, v1, v2)
    o = rng.uniform(-2, 2, (50, 3))
    d = rng.normal(size=(50, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    tri_a, t_a = intersect_rays(bvh, v0, e1, e2, o, d, 0.0, np.inf)
    tri_b, t_b = intersect_rays_brute(v0, e1, e2, o, d, 0.0, np.inf)
    np.testing.assert_array_equal(tri_a, tri_b)
    np.testing.assert_array_equal(t_a, t_b)


def test_closed_box_rays_from_inside_always_hit(furnace):
    rng = np.random.default_rng(5)
    o = np.zeros((2000, 3))
    d = rng.normal(size=(2000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    tri, t = furnace.intersect_batch_raw(o, d) if hasattr(
        furnace, "intersect_batch_raw") else geo.intersect_rays(
        furnace.bvh, furnace.v0, furnace.e1, furnace.e2, o, d, 0.0, np.inf)
    assert (tri >= 0).all()
    assert (t > 0).all()


def test_triangle_areas_analytic():
    # right triangle with legs 3 and 4 -> area 6
    v0 = np.array([[0.0, 0, 0]])
    v1 = np.array([[3.0, 0, 0]])
    v2 = np.array([[0.0, 4.0, 0]])
    assert triangle_areas(v0, v1, v2)[0] == pytest.approx(6.0)


def test_area_table_pick_proportional():
    # two triangles with areas 1 and 3: picks should split 1:3
    table = AreaTable(np.array([0, 1]), np.array([1.0, 3.0]))
    u = np.random.default_rng(0).random(200000)
    picks = table.pick(u)
    frac = (picks == 1).mean()
    assert frac == pytest.approx(0.75, abs=0.01)


def test_sample_triangle_points_uniform():
    # uniform sampling => centroid of samples approaches triangle centroid
    v0 = np.array([[0.0, 0, 0]])
    v1 = np.array([[2.0, 0, 0]])
    v2 = np.array([[0.0, 2.0, 0]])
    rng = np.random.default_rng(2)
    n = 100000
    u = rng.random((n, 2))
    p = sample_triangle_points(np.repeat(v0, n, 0), np.repeat(v1, n, 0),
                               np.repeat(v2, n, 0), u[:, 0], u[:, 1])
    np.testing.assert_allclose(p.mean(axis=0), [2 / 3, 2 / 3, 0], atol=0.01)
    # all samples inside: x,y >= 0 and x+y <= 2
    assert (p[:, 0] >= -1e-12).all()
    assert (p[:, 0] + p[:, 1] <= 2 + 1e-9).all()


def test_make_frame_orthonormal():
    rng = np.random.default_rng(7)
    n = rng.normal(size=(500, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    t, b = make_frame(n)
    for a, c in [(t, b), (t, n), (b, n)]:
        dots = np.einsum("ij,ij->i", a, c)
        np.testing.assert_allclose(dots, 0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(t, axis=1), 1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(b, axis=1), 1, atol=1e-12)


def test_uniform_hemisphere_integrates_cosine():
    # quadrature oracle: int_hemisphere cos = pi; MC with pdf 1/(2pi)
    rng = np.random.default_rng(11)
    n = np.tile([0.0, 0.0, 1.0], (400000, 1))
    u = rng.random((400000, 2))
    d, pdf = sample_direction_uniform(n, False, u[:, 0], u[:, 1])
    np.testing.assert_allclose(pdf, 1.0 / (2 * np.pi))
    est = (d[:, 2] / pdf).mean()
    assert est == pytest.approx(np.pi, rel=0.01)
    assert (np.einsum("ij,ij->i", d, n) >= 0).all()
