"""Gaussian-kernel RBF deformation, the synthetic non-rigid generator.

fit_rbf solves for weights that interpolate the control-point shifts exactly,
so a deformation built from shifts really does move each control point by its
shift. sample_rbf draws the shifts for a fixed 3x3x3 control grid over
[-1, 1]^3; grid layout and kernel width are configurable defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID_POINTS_PER_AXIS = 3
DEFAULT_KERNEL_WIDTH = 1.0


def control_grid(points_per_axis: int = GRID_POINTS_PER_AXIS) -> np.ndarray:
    """Regular control-point grid over [-1, 1]^3, x fastest."""
    axis = np.linspace(-1.0, 1.0, points_per_axis)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


def _kernel_matrix(a: np.ndarray, b: np.ndarray, kernel_width: float) -> np.ndarray:
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-sq / (2.0 * kernel_width * kernel_width))


@dataclass
class RBFDeformation:
    controls: np.ndarray      # [M, 3]
    shifts: np.ndarray        # [M, 3], displacement of each control point
    weights: np.ndarray       # [M, 3], solved coefficients
    kernel_width: float

    def apply(self, ps: np.ndarray) -> np.ndarray:
        return apply_rbf(self, ps)


def fit_rbf(controls: np.ndarray, shifts: np.ndarray,
            kernel_width: float = DEFAULT_KERNEL_WIDTH) -> RBFDeformation:
    """Solve K w = shifts per coordinate; K_ij = exp(-|c_i - c_j|^2 / (2 sigma^2))."""
    controls = np.asarray(controls, dtype=np.float64)
    shifts = np.asarray(shifts, dtype=np.float64)
    if controls.ndim != 2 or controls.shape[1] != 3 or controls.shape != shifts.shape:
        raise ValueError(
            f"fit_rbf: controls {controls.shape} and shifts {shifts.shape} must both be [M, 3]"
        )
    if kernel_width <= 0:
        raise ValueError("fit_rbf: kernel_width must be positive")
    m = controls.shape[0]
    k = _kernel_matrix(controls, controls, kernel_width)
    reg = k + 1e-10 * np.eye(m)  # conditioning only; exactness checked below
    try:
        weights = np.linalg.solve(reg, shifts)
    except np.linalg.LinAlgError:
        raise ValueError("fit_rbf: singular kernel matrix (duplicate control points?)")
    # residual against the true kernel, so near-duplicate controls with
    # contradictory shifts cannot slip through on the regularized solve
    residual = np.abs(k @ weights - shifts).max() if m else 0.0
    if residual > 1e-8:
        raise ValueError(
            f"fit_rbf: ill-conditioned system, interpolation residual {residual:.3g}"
        )
    return RBFDeformation(controls, shifts, weights, float(kernel_width))


def sample_rbf(seed: int, sigma_shift: float = 0.1,
               kernel_width: float = DEFAULT_KERNEL_WIDTH,
               points_per_axis: int = GRID_POINTS_PER_AXIS) -> RBFDeformation:
    """Deformation with Gaussian(0, sigma_shift) control shifts; seed-deterministic."""
    controls = control_grid(points_per_axis)
    rng = np.random.default_rng(seed)
    shifts = sigma_shift * rng.standard_normal(controls.shape)
    return fit_rbf(controls, shifts, kernel_width)


def apply_rbf(deformation: RBFDeformation, ps: np.ndarray) -> np.ndarray:
    """p' = p + sum_j w_j exp(-|p - c_j|^2 / (2 sigma^2)), order preserved."""
    ps = np.asarray(ps, dtype=np.float64)
    phi = _kernel_matrix(ps, deformation.controls, deformation.kernel_width)
    return ps + phi @ deformation.weights
