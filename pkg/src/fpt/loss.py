"""Chamfer Distance objectives and their gradients.

The two-way squared form is the training default. Nearest-neighbor
assignments are treated as locally constant for the gradient; at exact
assignment ties the smallest-index neighbor is used, matching the kernel's
tie rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .autodiff import Tape, Tensor, _accumulate, _emit, as_array

TWO_WAY = "two_way"
ONE_WAY = "one_way_source_to_target"


@dataclass(frozen=True)
class ChamferConfig:
    mode: str = TWO_WAY
    squared: bool = True

    def __post_init__(self):
        if self.mode not in (TWO_WAY, ONE_WAY):
            raise ValueError(f"ChamferConfig: unknown mode {self.mode!r}")


def _check(a: np.ndarray, b: np.ndarray):
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("chamfer: point sets must be nonempty")


def _directed(src64: np.ndarray, dst64: np.ndarray, squared: bool):
    """Mean NN distance src->dst and its gradients wrt both sets' points.

    Returns (value, grad_src, scatter) where scatter adds the dst-side
    gradient contribution into an array indexed like dst.
    """
    idx, sqd = kernels.nn_indices(src64, dst64)
    n = src64.shape[0]
    diff = src64 - dst64[idx]
    if squared:
        value = sqd.sum() / n
        gsrc = (2.0 / n) * diff
    else:
        dist = np.sqrt(sqd)
        value = dist.sum() / n
        safe = np.where(dist > 0, dist, 1.0)
        gsrc = diff / (n * safe[:, None])
        gsrc[dist == 0] = 0.0
    return value, gsrc, idx


def chamfer(a: np.ndarray, b: np.ndarray, cfg: ChamferConfig = ChamferConfig()) -> float:
    """two_way: (1/|a|) sum_i min_j d + (1/|b|) sum_j min_i d; one_way: first term."""
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    _check(a64, b64)
    value, _, _ = _directed(a64, b64, cfg.squared)
    if cfg.mode == TWO_WAY:
        back, _, _ = _directed(b64, a64, cfg.squared)
        value = value + back
    return float(value)


def chamfer_backward(a: np.ndarray, b: np.ndarray,
                     cfg: ChamferConfig = ChamferConfig()) -> np.ndarray:
    """d(chamfer)/da with NN assignments held fixed."""
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    _check(a64, b64)
    _, grad, _ = _directed(a64, b64, cfg.squared)
    if cfg.mode == TWO_WAY:
        # term (1/|b|) sum_j d(a_mn(j), b_j): each j pulls on its matched a row
        idx_ba, sqd_ba = kernels.nn_indices(b64, a64)
        m = b64.shape[0]
        diff = a64[idx_ba] - b64
        if cfg.squared:
            contrib = (2.0 / m) * diff
        else:
            dist = np.sqrt(sqd_ba)
            safe = np.where(dist > 0, dist, 1.0)
            contrib = diff / (m * safe[:, None])
            contrib[dist == 0] = 0.0
        np.add.at(grad, idx_ba, contrib)
    return grad


def chamfer_forward(tape: Optional[Tape], a, b,
                    cfg: ChamferConfig = ChamferConfig()) -> Tensor:
    """Tape node: scalar chamfer(a, b) with gradient flowing into a only."""
    aa = as_array(a)
    ba = as_array(b)
    value = chamfer(aa, ba, cfg)
    y = np.asarray(value, dtype=aa.dtype)

    def vjp(g):
        ga = chamfer_backward(aa, ba, cfg) * float(g)
        _accumulate(a, ga.astype(aa.dtype, copy=False))

    return _emit(tape, y, (a,), vjp)
