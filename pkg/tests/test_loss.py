"""Chamfer values against hand calculations; gradients against differences."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpt import geometry as geo
from fpt.autodiff import Parameter, Tape, finite_difference_gradient, sum_all
from fpt.loss import ChamferConfig, chamfer, chamfer_backward, chamfer_forward

ONE_WAY = ChamferConfig(mode="one_way_source_to_target")
UNSQUARED = ChamferConfig(squared=False)


def test_identical_sets_zero():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(20, 3))
    assert chamfer(a, a) == 0.0
    assert chamfer(a, a[::-1].copy()) == 0.0  # multiset equality is enough


def test_single_point_pair_two_way():
    a = np.array([[0.0, 0, 0]])
    b = np.array([[1.0, 0, 0]])
    assert chamfer(a, b) == pytest.approx(2.0)  # 1 + 1 by direct evaluation


def test_one_way_ignores_extra_target_points():
    rng = np.random.default_rng(1)
    b = rng.normal(size=(30, 3))
    a = b[:10]
    assert chamfer(a, b, ONE_WAY) == 0.0
    assert chamfer(a, b) > 0.0  # two-way sees the uncovered points


def test_empty_set_rejected():
    with pytest.raises(ValueError, match="nonempty"):
        chamfer(np.zeros((0, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError, match="nonempty"):
        chamfer(np.ones((2, 3)), np.zeros((0, 3)))


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="mode"):
        ChamferConfig(mode="both_ways")


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2**31 - 1))
def test_two_way_symmetric_exactly(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rng.integers(1, 20), 3))
    b = rng.normal(size=(rng.integers(1, 20), 3))
    assert chamfer(a, b) == chamfer(b, a)


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**31 - 1))
def test_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(15, 3))
    b = rng.normal(size=(12, 3))
    t = geo.RigidTransform(
        geo.euler_to_matrix(geo.EulerAngles(*rng.uniform(-180, 180, 3))),
        rng.uniform(-2, 2, 3))
    assert chamfer(t.apply(a), t.apply(b)) == pytest.approx(chamfer(a, b), abs=1e-9)


def test_nonnegative_and_zero_iff_mutual_coverage():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(8, 3))
    b = rng.normal(size=(9, 3))
    assert chamfer(a, b) > 0
    assert chamfer(a, np.vstack([a, a[:1]])) == 0.0


def test_unsquared_single_pair():
    a = np.array([[0.0, 0, 0]])
    b = np.array([[3.0, 4, 0]])
    assert chamfer(a, b, UNSQUARED) == pytest.approx(10.0)  # 5 + 5
    assert chamfer(a, b, ChamferConfig(mode="one_way_source_to_target", squared=False)) == pytest.approx(5.0)


def test_backward_zero_at_identical_sets():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(10, 3))
    np.testing.assert_array_equal(chamfer_backward(a, a), np.zeros((10, 3)))


def test_backward_single_pair_hand_value():
    a = np.array([[0.0, 0, 0]])
    b = np.array([[1.0, 0, 0]])
    np.testing.assert_allclose(chamfer_backward(a, b), [[-4.0, 0, 0]])
    np.testing.assert_allclose(chamfer_backward(a, b, ONE_WAY), [[-2.0, 0, 0]])


@pytest.mark.parametrize("cfg", [ChamferConfig(), ONE_WAY, UNSQUARED])
def test_backward_matches_finite_differences(cfg):
    rng = np.random.default_rng(4)
    a = rng.normal(size=(12, 3))
    b = rng.normal(size=(15, 3))
    analytic = chamfer_backward(a, b, cfg)

    def f(theta):
        return chamfer(theta.reshape(12, 3), b, cfg)

    numeric = finite_difference_gradient(f, a.ravel(), h=1e-6).reshape(12, 3)
    denom = np.maximum(np.abs(analytic), np.maximum(np.abs(numeric), 1e-3))
    assert (np.abs(analytic - numeric) / denom).max() < 1e-4


def test_chamfer_forward_routes_gradient_to_source_only():
    rng = np.random.default_rng(5)
    a = Parameter(rng.normal(size=(6, 3)), "a")
    b = Parameter(rng.normal(size=(7, 3)), "b")
    tape = Tape()
    lo = chamfer_forward(tape, a, b)
    tape.backward(lo, parameters=[a, b])
    np.testing.assert_allclose(a.grad, chamfer_backward(a.value, b.value))
    np.testing.assert_array_equal(b.grad, np.zeros((7, 3)))


def test_chamfer_forward_respects_upstream_scale():
    rng = np.random.default_rng(6)
    a = Parameter(rng.normal(size=(5, 3)), "a")
    b = rng.normal(size=(5, 3))
    tape = Tape()
    from fpt.autodiff import scale
    lo = scale(tape, chamfer_forward(tape, a, b), 0.5)
    tape.backward(lo, parameters=[a])
    np.testing.assert_allclose(a.grad, 0.5 * chamfer_backward(a.value, b))
