"""Spine registration plumbing and TxA geometry."""

import numpy as np
import pytest

from fpt import shapes, spine
from fpt.loss import chamfer
from fpt.model import init_model

TOY_FE = (3, 8, 16)
TOY_PT = (8,)


def _labeled_model(n_points=256):
    surface, landmarks = shapes.spine_point_set(n_points, seed=0)
    return spine.LabeledSpineModel(surface=surface, landmarks=landmarks,
                                   ap_axis=shapes.SPINE_AP_AXIS)


def _identity_net(seed=0):
    return init_model(seed, fe_widths=TOY_FE, pt_hidden=TOY_PT)


def _nudged_net(seed=1):
    net = _identity_net(seed)
    rng = np.random.default_rng(seed + 50)
    w, b = net.pt_layers[-1]
    w.value = rng.normal(scale=0.05, size=w.value.shape).astype(np.float32)
    b.value = rng.normal(scale=0.02, size=b.value.shape).astype(np.float32)
    return net


def test_labeled_model_validates_landmarks():
    surface, landmarks = shapes.spine_point_set(128, seed=1)
    landmarks = dict(landmarks)
    landmarks["stray"] = np.array([50.0, 0, 0])
    with pytest.raises(ValueError, match="stray"):
        spine.LabeledSpineModel(surface=surface, landmarks=landmarks)


def test_spine_point_set_contains_landmarks():
    surface, landmarks = shapes.spine_point_set(64, seed=3)
    assert surface.shape == (64, 3)
    for p in landmarks.values():
        assert (np.abs(surface - p).sum(axis=1) == 0).any()
    with pytest.raises(ValueError, match="exceed"):
        shapes.spine_point_set(10, seed=0)


def test_register_identity_network_is_exact_identity():
    model = _labeled_model()
    rng = np.random.default_rng(2)
    recon = model.surface + rng.normal(scale=0.05, size=model.surface.shape)
    reg = spine.register_spine(model, recon, _identity_net())
    assert reg.deformed_surface.tobytes() == model.surface.tobytes()
    for name, p in model.landmarks.items():
        assert reg.deformed_landmarks[name].tobytes() == p.tobytes()


def test_register_landmark_rides_with_coincident_surface_point():
    model = _labeled_model()
    # plant a landmark exactly on a surface point
    model.landmarks["probe"] = model.surface[17].copy()
    net = _nudged_net()
    reg = spine.register_spine(model, model.surface[::2], net)
    assert reg.deformed_landmarks["probe"].tobytes() == reg.deformed_surface[17].tobytes()


def test_register_prealign_modes():
    model = _labeled_model()
    offset = model.surface + [5.0, -3.0, 2.0]
    centered = spine.register_spine(model, offset, _identity_net(), prealign="centroid")
    np.testing.assert_allclose(centered.prealigned_recon.mean(axis=0),
                               model.surface.mean(axis=0), atol=1e-9)
    scaled = spine.register_spine(model, offset * 2.0, _identity_net(),
                                  prealign="centroid_scale")
    np.testing.assert_allclose(scaled.prealigned_recon.min(axis=0),
                               model.surface.min(axis=0), atol=1e-9)
    np.testing.assert_allclose(scaled.prealigned_recon.max(axis=0),
                               model.surface.max(axis=0), atol=1e-9)
    raw = spine.register_spine(model, offset, _identity_net(), prealign="none")
    np.testing.assert_array_equal(raw.prealigned_recon, offset)
    with pytest.raises(ValueError, match="prealign"):
        spine.register_spine(model, offset, _identity_net(), prealign="icp")


def test_register_rejects_degenerate_surface():
    flat = np.zeros((32, 3))
    flat[:, 0] = np.linspace(0, 1, 32)  # y and z extents are zero
    model_ok = _labeled_model()
    with pytest.raises(ValueError, match="degenerate"):
        bad = spine.LabeledSpineModel(surface=flat, landmarks={})
        spine.register_spine(bad, model_ok.surface, _identity_net())


def test_project_coronal_drops_ap_axis():
    np.testing.assert_array_equal(spine.project_coronal([1.0, 2.0, 3.0], ap_axis=1),
                                  [1.0, 3.0])
    a = spine.project_coronal([0.5, 9.0, -0.5], ap_axis=1)
    b = spine.project_coronal([0.5, -4.0, -0.5], ap_axis=1)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        spine.project_coronal([1.0, 2.0, 3.0], ap_axis=3)


def test_txa_parallel_and_perpendicular():
    upper = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    lower_parallel = np.array([[0.0, 0, -1], [1.0, 0, -1]])
    assert spine.txa(upper, lower_parallel) == pytest.approx(0.0)
    lower_perp = np.array([[0.0, 0, 0], [0.0, 0, 1.0]])
    assert spine.txa(upper, lower_perp) == pytest.approx(90.0)


def test_txa_slope_one_is_45_degrees():
    upper = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    lower = np.array([[0.0, 0, 0], [1.0, 0, 1.0]])
    assert spine.txa(upper, lower) == pytest.approx(45.0, abs=1e-9)


def test_txa_endpoint_and_line_swaps():
    rng = np.random.default_rng(3)
    upper = rng.normal(size=(2, 3))
    lower = rng.normal(size=(2, 3))
    base = spine.txa(upper, lower)
    assert spine.txa(upper[::-1], lower) == pytest.approx(base, abs=1e-12)
    assert spine.txa(upper, lower[::-1]) == pytest.approx(base, abs=1e-12)
    assert spine.txa(lower, upper) == pytest.approx(base, abs=1e-12)
    assert 0.0 <= base <= 90.0


def test_txa_invariant_to_inplane_rigid_motion():
    rng = np.random.default_rng(4)
    upper = rng.normal(size=(2, 3))
    lower = rng.normal(size=(2, 3))
    base = spine.txa(upper, lower, ap_axis=1)
    # rotation about the AP (y) axis plus arbitrary translation
    ang = np.deg2rad(37.0)
    rot = np.array([[np.cos(ang), 0, np.sin(ang)],
                    [0, 1, 0],
                    [-np.sin(ang), 0, np.cos(ang)]])
    shift = np.array([0.3, -2.0, 1.7])
    moved = spine.txa(upper @ rot.T + shift, lower @ rot.T + shift, ap_axis=1)
    assert moved == pytest.approx(base, abs=1e-9)


def test_txa_zero_length_projected_line_rejected():
    upper = np.array([[0.0, 0, 0], [0.0, 5.0, 0]])  # differs only along AP
    lower = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    with pytest.raises(ValueError, match="zero length"):
        spine.txa(upper, lower, ap_axis=1)


def test_measure_case_straight_spine_identity_network_is_zero():
    model = _labeled_model()
    result = spine.measure_case(model, model.surface, _identity_net(),
                                upper_vertebra="v0", lower_vertebra="v4")
    assert result.angle_deg == pytest.approx(0.0, abs=1e-12)
    assert result.upper_line.shape == (2, 3)
    assert result.upper_coronal.shape == (2, 2)


def test_measure_case_missing_landmark_named():
    model = _labeled_model()
    with pytest.raises(ValueError, match="v9_left"):
        spine.measure_case(model, model.surface, _identity_net(),
                           upper_vertebra="v9", lower_vertebra="v4")


def test_register_smoke_chamfer_not_worse_when_aligned():
    # with an identity-start network the post-registration chamfer cannot
    # exceed the pre-registration chamfer on an already-aligned pair
    model = _labeled_model()
    reg = spine.register_spine(model, model.surface, _identity_net())
    pre = chamfer(model.surface, model.surface)
    post = chamfer(reg.deformed_surface, model.surface)
    assert post <= pre + 1e-12


def test_landmarks_json_round_trip(tmp_path):
    _, landmarks = shapes.spine_mesh()
    path = tmp_path / "landmarks.json"
    spine.save_landmarks(landmarks, shapes.SPINE_AP_AXIS, path)
    back, ap_axis = spine.load_landmarks(path)
    assert ap_axis == shapes.SPINE_AP_AXIS
    assert set(back) == set(landmarks)
    for name in landmarks:
        np.testing.assert_allclose(back[name], landmarks[name])


def test_landmarks_json_errors(tmp_path):
    no_ap = tmp_path / "no_ap.json"
    no_ap.write_text('{"v0_left": [1, 2, 3]}')
    with pytest.raises(ValueError, match="ap_axis"):
        spine.load_landmarks(no_ap)
    bad_vec = tmp_path / "bad_vec.json"
    bad_vec.write_text('{"ap_axis": 1, "v0_left": [1, 2]}')
    with pytest.raises(ValueError, match="v0_left"):
        spine.load_landmarks(bad_vec)


def test_txa_report_written(tmp_path):
    import json
    model = _labeled_model()
    result = spine.measure_case(model, model.surface, _identity_net(),
                                upper_vertebra="v0", lower_vertebra="v4")
    path = tmp_path / "txa.json"
    spine.write_txa_report(result, "net.fpt", path)
    doc = json.loads(path.read_text())
    assert doc["angle_deg"] == result.angle_deg
    assert doc["checkpoint"] == "net.fpt"
    assert len(doc["upper_line_coronal"]) == 2
