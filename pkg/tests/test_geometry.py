"""Mesh parsing, sampling, normalization, rigid transforms, occlusion, Kabsch."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpt import geometry as geo

MINIMAL_OFF = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"


def test_parse_off_minimal():
    mesh = geo.parse_off(MINIMAL_OFF)
    assert mesh.vertices.shape == (3, 3)
    assert mesh.faces.shape == (1, 3)
    np.testing.assert_array_equal(mesh.faces[0], [0, 1, 2])


def test_parse_off_quad_fan_triangulation():
    text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
    mesh = geo.parse_off(text)
    np.testing.assert_array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_parse_off_fused_header_quirk():
    mesh = geo.parse_off("OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    assert mesh.vertices.shape == (3, 3)


def test_parse_off_headerless_and_comments():
    text = "# comment\n3 1 0\n\n0 0 0\n1 0 0\n# inner comment\n0 1 0\n3 0 1 2\n"
    mesh = geo.parse_off(text)
    assert mesh.vertices.shape == (3, 3)


def test_parse_off_out_of_range_index_names_line():
    text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n"
    with pytest.raises(ValueError, match="line 6"):
        geo.parse_off(text)


def test_parse_off_non_numeric_token_names_line():
    text = "OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n"
    with pytest.raises(ValueError, match="line 4"):
        geo.parse_off(text)


def test_parse_off_malformed_counts():
    with pytest.raises(ValueError, match="counts"):
        geo.parse_off("OFF\n3 1\n")


def test_parse_off_truncated_file():
    with pytest.raises(ValueError):
        geo.parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n")


def _barycentric(p, a, b, c):
    m = np.column_stack([b - a, c - a])
    uv, *_ = np.linalg.lstsq(m, p - a, rcond=None)
    return np.array([1.0 - uv.sum(), uv[0], uv[1]])


def test_sample_surface_stays_inside_triangle():
    mesh = geo.Mesh(np.array([[0.0, 0, 0], [2, 0, 0], [0, 3, 1]]), np.array([[0, 1, 2]]))
    pts = geo.sample_surface(mesh, 2048, seed=0)
    assert pts.shape == (2048, 3)
    for p in pts[::64]:
        bc = _barycentric(p, *mesh.vertices)
        assert np.all(bc >= -1e-9) and np.all(bc <= 1 + 1e-9)
        assert abs(bc.sum() - 1.0) < 1e-9


def test_sample_surface_area_weighting():
    # area ratio 9:1; counts must split accordingly within binomial 4 sigma
    verts = np.array([
        [0.0, 0, 0], [9, 0, 0], [0, 2, 0],   # area 9
        [10.0, 0, 0], [11, 0, 0], [10, 2, 0],  # area 1
    ])
    mesh = geo.Mesh(verts, np.array([[0, 1, 2], [3, 4, 5]]))
    pts = geo.sample_surface(mesh, 10000, seed=42)
    big = np.sum(pts[:, 0] < 9.5)
    sigma = np.sqrt(10000 * 0.9 * 0.1)
    assert abs(big - 9000) <= 4 * sigma


def test_sample_surface_deterministic():
    mesh = geo.parse_off(MINIMAL_OFF)
    a = geo.sample_surface(mesh, 100, seed=7)
    b = geo.sample_surface(mesh, 100, seed=7)
    assert a.tobytes() == b.tobytes()
    c = geo.sample_surface(mesh, 100, seed=8)
    assert a.tobytes() != c.tobytes()


def test_sample_surface_zero_area_rejected():
    mesh = geo.Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
    with pytest.raises(ValueError, match="area"):
        geo.sample_surface(mesh, 10, seed=0)


def test_normalize_maps_extent_to_unit_interval():
    ps = np.array([[0.0, -4, 10], [2, 4, 30], [1, 0, 20]])
    out, rec = geo.normalize_to_unit_box(ps)
    np.testing.assert_allclose(out[0], [-1, -1, -1])
    np.testing.assert_allclose(out[1], [1, 1, 1])
    np.testing.assert_allclose(out[2], [0, 0, 0])
    np.testing.assert_allclose(rec.denormalize(out), ps, atol=1e-6)


def test_normalize_fixed_point():
    ps = np.array([[-1.0, -1, -1], [1, 1, 1], [0.25, -0.5, 0.75]])
    out, _ = geo.normalize_to_unit_box(ps)
    assert out.tobytes() == ps.tobytes()


def test_normalize_degenerate_axis_rejected():
    ps = np.array([[0.0, 0, 0], [1, 0, 1]])  # y extent is zero
    with pytest.raises(ValueError, match="axis 1"):
        geo.normalize_to_unit_box(ps)


def test_euler_identity():
    np.testing.assert_allclose(geo.euler_to_matrix(geo.EulerAngles(0, 0, 0)), np.eye(3), atol=1e-15)


def test_euler_z90_rotates_x_to_y():
    r = geo.euler_to_matrix(geo.EulerAngles(0, 0, 90))
    np.testing.assert_allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-12)


@settings(deadline=None, max_examples=100)
@given(st.floats(-180, 180), st.floats(-180, 180), st.floats(-180, 180))
def test_euler_matrix_is_rotation(rx, ry, rz):
    r = geo.euler_to_matrix(geo.EulerAngles(rx, ry, rz))
    np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-9)
    assert abs(np.linalg.det(r) - 1.0) < 1e-9


@settings(deadline=None, max_examples=100)
@given(st.floats(-89, 89), st.floats(-89, 89), st.floats(-179, 179))
def test_euler_round_trip(rx, ry, rz):
    a = geo.EulerAngles(rx, ry, rz)
    back = geo.matrix_to_euler(geo.euler_to_matrix(a))
    np.testing.assert_allclose(back.as_array(), a.as_array(), atol=1e-9)


def test_matrix_to_euler_gimbal_pins_rx():
    r = geo.euler_to_matrix(geo.EulerAngles(25.0, 90.0, 10.0))
    back = geo.matrix_to_euler(r)
    assert back.rx == 0.0 and abs(back.ry - 90.0) < 1e-9
    np.testing.assert_allclose(geo.euler_to_matrix(back), r, atol=1e-9)


def test_rigid_validation_rejects_scaled_matrix():
    with pytest.raises(ValueError, match="rotation"):
        geo.RigidTransform(2 * np.eye(3), np.zeros(3))


def test_apply_rigid_identity_and_translation():
    ps = np.array([[0.0, 0, 0], [1, 2, 3]])
    ident = geo.RigidTransform.identity()
    assert geo.apply_rigid(ps, ident).tobytes() == ps.tobytes()
    t = geo.RigidTransform(np.eye(3), [1, 2, 3])
    np.testing.assert_array_equal(geo.apply_rigid(ps, t)[0], [1, 2, 3])


def test_apply_rigid_inverse_round_trip():
    rng = np.random.default_rng(6)
    ps = rng.normal(size=(20, 3))
    t = geo.RigidTransform(geo.euler_to_matrix(geo.EulerAngles(30, -20, 45)), [0.3, -1, 2])
    back = geo.apply_rigid(geo.apply_rigid(ps, t), t.inverse())
    np.testing.assert_allclose(back, ps, atol=1e-6)


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(8)
    ps = rng.normal(size=(10, 3))
    t1 = geo.RigidTransform(geo.euler_to_matrix(geo.EulerAngles(10, 20, 30)), [1, 0, -1])
    t2 = geo.RigidTransform(geo.euler_to_matrix(geo.EulerAngles(-5, 40, 0)), [0, 2, 0])
    seq = geo.apply_rigid(geo.apply_rigid(ps, t1), t2)
    np.testing.assert_allclose(geo.apply_rigid(ps, t2.compose(t1)), seq, atol=1e-12)


def test_nearest_neighbors_examples():
    rng = np.random.default_rng(10)
    ps = rng.normal(size=(16, 3))
    idx, sqd = geo.nearest_neighbors(ps, ps)
    np.testing.assert_array_equal(idx, np.arange(16))
    with pytest.raises(ValueError, match="empty"):
        geo.nearest_neighbors(ps, np.zeros((0, 3)))


def test_occlude_size_and_paper_fraction():
    rng = np.random.default_rng(3)
    ps = rng.normal(size=(2048, 3))
    out = geo.occlude(ps, seed=1)
    assert out.shape == (1536, 3)  # 512 of 2048 removed


def test_occlude_k_zero_is_identity():
    rng = np.random.default_rng(4)
    ps = rng.normal(size=(50, 3))
    assert geo.occlude(ps, seed=0, k=0).tobytes() == ps.tobytes()


def test_occlude_rejects_k_too_large():
    with pytest.raises(ValueError, match="smaller"):
        geo.occlude(np.zeros((5, 3)), seed=0, k=5)


def test_occlude_removes_knn_of_some_anchor():
    # the removed rows must be exactly the k nearest neighbors of one of the
    # input points (the seed-chosen anchor), anchor included
    rng = np.random.default_rng(12)
    ps = rng.normal(size=(128, 3))
    k = 32
    out = geo.occlude(ps, seed=9, k=k)
    kept = {tuple(p) for p in out}
    removed = np.array([i for i, p in enumerate(ps) if tuple(p) not in kept])
    assert len(removed) == k
    matches = 0
    for anchor in range(len(ps)):
        d = ((ps - ps[anchor]) ** 2).sum(axis=1)
        knn = set(np.argsort(d, kind="stable")[:k])
        if knn == set(removed) and anchor in knn:
            matches += 1
    assert matches >= 1


def test_occlude_preserves_row_order():
    rng = np.random.default_rng(13)
    ps = rng.normal(size=(64, 3))
    out = geo.occlude(ps, seed=2, k=16)
    pos = [np.flatnonzero((ps == p).all(axis=1))[0] for p in out]
    assert pos == sorted(pos)


def test_occlude_deterministic():
    rng = np.random.default_rng(14)
    ps = rng.normal(size=(100, 3))
    assert geo.occlude(ps, seed=5, k=10).tobytes() == geo.occlude(ps, seed=5, k=10).tobytes()


def test_kabsch_identity():
    rng = np.random.default_rng(20)
    ps = rng.normal(size=(12, 3))
    t = geo.kabsch(ps, ps)
    np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(t.translation, np.zeros(3), atol=1e-9)


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 2**31 - 1))
def test_kabsch_recovers_constructed_transform(seed):
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(10, 3))
    angles = geo.EulerAngles(*rng.uniform(-45, 45, size=3))
    r0 = geo.euler_to_matrix(angles)
    t0 = rng.uniform(-1, 1, size=3)
    est = geo.kabsch(src, src @ r0.T + t0)
    np.testing.assert_allclose(est.rotation, r0, atol=1e-6)
    np.testing.assert_allclose(est.translation, t0, atol=1e-6)


def test_kabsch_collinear_rejected():
    src = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="degenerate"):
        geo.kabsch(src, src + 1.0)


def test_kabsch_size_mismatch_rejected():
    with pytest.raises(ValueError, match="mismatch"):
        geo.kabsch(np.zeros((4, 3)), np.zeros((5, 3)))


def test_kabsch_beats_identity_residual():
    rng = np.random.default_rng(21)
    src = rng.normal(size=(30, 3))
    dst = src @ geo.euler_to_matrix(geo.EulerAngles(15, 5, -10)).T + [0.1, 0.2, 0.3]
    dst += rng.normal(scale=0.05, size=dst.shape)
    est = geo.kabsch(src, dst)
    fit = ((est.apply(src) - dst) ** 2).sum()
    ident = ((src - dst) ** 2).sum()
    assert fit <= ident


def test_xyz_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(30)
    ps = rng.normal(size=(50, 3))
    path = tmp_path / "pts.xyz"
    geo.save_xyz(path, ps)
    back = geo.load_xyz(path)
    assert back.tobytes() == ps.tobytes()


def test_xyz_parse_comments_and_errors():
    ps = geo.parse_xyz("# header\n1 2 3\n\n4 5 6\n")
    np.testing.assert_array_equal(ps, [[1, 2, 3], [4, 5, 6]])
    with pytest.raises(ValueError, match="line 2"):
        geo.parse_xyz("1 2 3\n4 5\n")
    with pytest.raises(ValueError, match="no points"):
        geo.parse_xyz("# only comments\n")
