import numpy as np
import pytest

from sgir.errors import DegenerateNormal, ValidationError
from sgir.geometry import (
    Box, Empty, Ray, STANDARD_SCENE_CONFIG, SdfScene, SmoothUnion, Sphere, Torus, Transformed,
    brute_force_occupancy, build_octree, compare_tracers, load_octree, random_rays, sample_surface,
    save_octree, sdf_eval, sdf_normal, second_intersection, sphere_trace, standard_scene, trace_octree
)

BBOX = [[-2.0] * 3, [2.0] * 3]


def unit_sphere():
    return SdfScene(Sphere(1.0), BBOX)


def blended_spheres():
    left = Transformed(Sphere(0.8), translation=(-0.7, 0.0, 0.0))
    right = Transformed(Sphere(0.8), translation=(0.7, 0.0, 0.0))
    return SdfScene(SmoothUnion([left, right], 0.5), BBOX)


def five_point_gradient(scene, p, h=1e-3):
    grad = np.zeros(3)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        f = lambda q: sdf_eval(scene, q)
        grad[axis] = (-f(p + 2 * e) + 8 * f(p + e) - 8 * f(p - e) + f(p - 2 * e)) / (12 * h)
    return grad


def test_sdf_sphere_values():
    """Test the analytic sphere distance outside and on the surface."""
    scene = unit_sphere()
    assert sdf_eval(scene, [0.0, 0.0, -3.0]) == pytest.approx(2.0, abs=1e-12)
    assert abs(sdf_eval(scene, [0.6, 0.0, 0.8])) <= 1e-9


def test_sdf_union_takes_minimum():
    """Test a point inside the sphere above the plane reports the sphere distance."""
    assert sdf_eval(standard_scene(), [0.0, -0.5, 0.0]) == pytest.approx(-0.5, abs=1e-12)


def test_sdf_primitives():
    """Test box, torus and transformed distances."""
    box = SdfScene(Box([1.0, 1.0, 1.0]), BBOX)
    assert sdf_eval(box, [2.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert sdf_eval(box, [0.0, 0.0, 0.0]) == pytest.approx(-1.0)
    torus = SdfScene(Torus(1.0, 0.25), BBOX)
    assert sdf_eval(torus, [1.0, 0.0, 0.0]) == pytest.approx(-0.25)
    assert sdf_eval(torus, [1.0, 1.0, 0.0]) == pytest.approx(0.75)
    moved = SdfScene(Transformed(Sphere(1.0), translation=(1.0, 0.0, 0.0), scale=2.0), [[-4.0] * 3, [4.0] * 3])
    assert sdf_eval(moved, [4.0, 0.0, 0.0]) == pytest.approx(1.0)


def test_sdf_batch():
    """Test batched evaluation returns one distance per point."""
    p = np.array([[0.0, 0.0, -3.0], [0.0, 0.0, 0.0]])
    assert np.allclose(sdf_eval(unit_sphere(), p), [2.0, -1.0])


def test_sdf_normal_sphere_and_plane():
    """Test normals on the sphere and on the ground plane."""
    scene = standard_scene()
    assert np.allclose(sdf_normal(unit_sphere(), [0.0, 0.0, -1.0]), [0.0, 0.0, -1.0])
    assert np.allclose(sdf_normal(scene, [1.7, -1.0, 0.3]), [0.0, 1.0, 0.0])


def test_sdf_normal_central_matches_analytic():
    """Test central differences agree with the analytic sphere normal."""
    rng = np.random.default_rng(3)
    d = rng.normal(size=(64, 3))
    p = d / np.linalg.norm(d, axis=-1, keepdims=True)
    scene = unit_sphere()
    assert np.allclose(sdf_normal(scene, p, method="central"), p, atol=1e-4)
    assert np.allclose(sdf_normal(scene, p), p, atol=1e-12)


def test_sdf_normal_smooth_union_blend():
    """Test the blended gradient against a five-point finite difference."""
    scene = blended_spheres()
    p = np.array([0.0, 0.62, 0.1])
    expected = five_point_gradient(scene, p)
    expected /= np.linalg.norm(expected)
    assert np.allclose(sdf_normal(scene, p), expected, atol=1e-3)


def test_sdf_normal_degenerate():
    """Test the sphere center has no normal."""
    with pytest.raises(DegenerateNormal):
        sdf_normal(unit_sphere(), [0.0, 0.0, 0.0])


def test_scene_from_config_errors():
    """Test malformed scene descriptions are rejected."""
    with pytest.raises(ValidationError):
        SdfScene.from_config({"primitives": [{"shape": "cone"}]})
    with pytest.raises(ValidationError):
        SdfScene.from_config({"primitives": [{"shape": "sphere"}], "combinator": "intersection"})
    with pytest.raises(ValidationError):
        SdfScene(Sphere(1.0), [[1.0] * 3, [-1.0] * 3])
    with pytest.raises(ValidationError):
        Transformed(Sphere(1.0), scale=0.0)


def test_scene_config_roundtrip():
    """Test a scene written back to config evaluates identically."""
    scene = SdfScene.from_config(STANDARD_SCENE_CONFIG)
    again = SdfScene.from_config(scene.to_config())
    p = np.random.default_rng(0).uniform(-2.0, 2.0, size=(200, 3))
    assert np.allclose(scene.distance(p), again.distance(p))
    assert again.materials == scene.materials


def test_lipschitz_bound():
    """Test the smooth union carries the larger Lipschitz bound."""
    assert unit_sphere().lipschitz == 1.0
    assert standard_scene().lipschitz == 1.0
    assert blended_spheres().lipschitz == pytest.approx(1.2)


def test_octree_empty_scene():
    """Test an empty scene has no occupied leaves."""
    octree = build_octree(SdfScene(Empty(), BBOX), 4)
    assert octree.leaf_count == 0
    assert octree.node_count == 0


def test_sample_surface_without_surface():
    """Test sampling a scene without a surface gives up with ValidationError."""
    with pytest.raises(ValidationError):
        sample_surface(SdfScene(Empty(), BBOX), 10, np.random.default_rng(0), batch=256, max_batches=3)
    assert sample_surface(SdfScene(Empty(), BBOX), 0, np.random.default_rng(0)).shape == (0, 3)


def test_octree_matches_brute_force():
    """Test hierarchical occupancy equals per-leaf classification."""
    scene = unit_sphere()
    octree = build_octree(scene, 5)
    assert np.array_equal(octree.levels[-1], brute_force_occupancy(scene, 5))
    assert octree.leaf_count > 0


def test_octree_leaf_size():
    """Test the leaf size is the extent over 2^depth."""
    octree = build_octree(unit_sphere(), 6)
    assert np.allclose(octree.leaf_size, 4.0 / 64)
    assert len(octree.levels) == 7


def test_octree_is_conservative():
    """Test every sampled surface point falls in an occupied leaf."""
    scene = standard_scene()
    octree = build_octree(scene, 5)
    points = sample_surface(scene, 2000, np.random.default_rng(11))
    assert len(points) == 2000
    assert octree.contains_occupied(points).all()


def test_octree_save_load(tmp_path):
    """Test the occupancy archive restores the same octree."""
    octree = build_octree(standard_scene(), 4)
    path = tmp_path / "octree.npz"
    save_octree(path, octree)
    again = load_octree(path)
    assert again.max_depth == 4
    assert np.array_equal(again.bbox, octree.bbox)
    assert all(np.array_equal(a, b) for a, b in zip(again.levels, octree.levels))


def test_octree_load_rejects_garbage(tmp_path):
    """Test a file that is not an octree archive is rejected."""
    path = tmp_path / "octree.npz"
    path.write_bytes(b"not an archive")
    with pytest.raises(ValidationError):
        load_octree(path)
    np.savez(tmp_path / "other.npz", values=np.zeros(3))
    with pytest.raises(ValidationError):
        load_octree(tmp_path / "other.npz")


def test_ray_validation():
    """Test rays need 0 <= t_min < t_max."""
    with pytest.raises(ValueError):
        Ray.make([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], t_min=-1.0)
    with pytest.raises(ValueError):
        Ray.make([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], t_min=2.0, t_max=1.0)


@pytest.mark.parametrize("tracer", ["octree", "sphere"])
def test_trace_unit_sphere(tracer):
    """Test the analytic hit of a ray along +z."""
    scene = unit_sphere()
    rays = Ray.make([0.0, 0.0, -3.0], [0.0, 0.0, 1.0])
    hit = trace_octree(build_octree(scene, 6), scene, rays) if tracer == "octree" else sphere_trace(scene, rays)
    assert hit.valid[0]
    assert hit.t[0] == pytest.approx(2.0, abs=1e-4)
    assert np.allclose(hit.point[0], [0.0, 0.0, -1.0], atol=1e-4)
    assert np.allclose(hit.normal[0], [0.0, 0.0, -1.0], atol=1e-4)


@pytest.mark.parametrize("tracer", ["octree", "sphere"])
def test_trace_miss(tracer):
    """Test a ray passing above the sphere is invalid."""
    scene = unit_sphere()
    rays = Ray.make([0.0, 1.5, -3.0], [0.0, 0.0, 1.0])
    hit = trace_octree(build_octree(scene, 6), scene, rays) if tracer == "octree" else sphere_trace(scene, rays)
    assert not hit.valid[0]
    assert np.isinf(hit.t[0])


def test_trace_ray_outside_bbox():
    """Test a ray that never enters the bbox misses without stepping."""
    scene = unit_sphere()
    rays = Ray.make([0.0, 5.0, 0.0], [1.0, 0.0, 0.0])
    assert not trace_octree(build_octree(scene, 4), scene, rays).valid[0]


def test_tracer_parity():
    """Test the octree and sphere tracers agree on random rays."""
    scene = standard_scene()
    octree = build_octree(scene, 6)
    rays = random_rays(scene, 400, np.random.default_rng(5))
    report = compare_tracers(octree, scene, rays)
    assert report["rays"] == 400
    assert report["capped"] <= 8
    assert report["hit_parity"] == 1.0
    assert report["max_dt"] <= 1e-3
    assert report["hits"] > 0


@pytest.mark.parametrize("gap, hits", [(5e-5, True), (3e-4, False)])
def test_grazing_ray_parity(gap, hits):
    """Test a ray passing just above the sphere hits exactly when it comes within the tolerance."""
    scene = unit_sphere()
    rays = Ray.make([0.0, 1.0 + gap, -1.9], [0.0, 0.0, 1.0])
    octree_hit = trace_octree(build_octree(scene, 6), scene, rays)
    sphere_hit = sphere_trace(scene, rays)
    assert octree_hit.valid[0] == hits
    assert sphere_hit.valid[0] == hits
    if hits:
        assert abs(octree_hit.t[0] - sphere_hit.t[0]) <= 1e-3


def test_shallow_ray_caps_sphere_trace():
    """Test a ray skimming down onto the plane exhausts the sphere tracer but not the octree."""
    scene = standard_scene()
    rays = Ray.make([-1.9, -0.97, 1.5], [3.8, -0.04, 0.0])
    sphere_hit = sphere_trace(scene, rays)
    assert sphere_hit.capped[0]
    assert not sphere_hit.valid[0]
    octree_hit = trace_octree(build_octree(scene, 6), scene, rays)
    assert octree_hit.valid[0]
    assert not octree_hit.capped[0]
    assert octree_hit.point[0, 1] == pytest.approx(-1.0, abs=1e-4)
    report = compare_tracers(build_octree(scene, 6), scene, rays)
    assert report["capped"] == 1
    assert report["hit_parity"] == 1.0


def test_octree_no_false_negatives():
    """Test rays aimed at the sphere through the origin always hit."""
    scene = standard_scene()
    octree = build_octree(scene, 6)
    rng = np.random.default_rng(8)
    d = rng.normal(size=(300, 3))
    d[:, 1] = np.abs(d[:, 1])
    origin = 1.9 * d / np.linalg.norm(d, axis=-1, keepdims=True)
    hit = trace_octree(octree, scene, Ray.make(origin, -origin))
    assert hit.valid.all()
    assert np.allclose(np.linalg.norm(hit.point, axis=-1), 1.0, atol=1e-4)


@pytest.mark.parametrize("method", ["octree", "sphere"])
def test_second_intersection_shadowed(method):
    """Test a plane point looking at the sphere center is occluded."""
    scene = standard_scene()
    octree = build_octree(scene, 6)
    x = np.array([1.5, -1.0, 0.0])
    omega = -x / np.linalg.norm(x)
    hit = second_intersection(octree, scene, x, omega, method=method)
    assert hit.valid[0]
    assert np.linalg.norm(hit.point[0]) == pytest.approx(1.0, abs=1e-4)


def test_second_intersection_escapes():
    """Test the top of the sphere sees the sky straight up."""
    scene = standard_scene()
    hit = second_intersection(build_octree(scene, 6), scene, [0.0, 1.0, 0.0], [0.0, 1.0, 0.0])
    assert not hit.valid[0]


def test_second_intersection_tangent_parity():
    """Test tangent secondary rays agree between the two tracers."""
    scene = standard_scene()
    octree = build_octree(scene, 6)
    x = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    omega = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    a = second_intersection(octree, scene, x, omega)
    b = second_intersection(octree, scene, x, omega, method="sphere")
    assert np.array_equal(a.valid, b.valid)


@pytest.mark.slow
def test_tracer_parity_large():
    """Test parity on ten thousand rays at full depth."""
    scene = standard_scene()
    octree = build_octree(scene, 8)
    report = compare_tracers(octree, scene, random_rays(scene, 10000, np.random.default_rng(1)))
    assert report["capped"] <= 200
    assert report["hit_parity"] == 1.0
    assert report["max_dt"] <= 1e-3
