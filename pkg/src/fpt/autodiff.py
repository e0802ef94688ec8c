"""Minimal dense-tensor substrate with reverse-mode gradients.

The network graph here is static, so this is a plain recording tape rather
than a general autodiff engine: ops append nodes to a Tape, backward() walks
it once in reverse. Passing tape=None runs the same forward math without
recording (the inference path).

Values live in numpy arrays. Float32 is the training dtype; the gradient
checks run the identical code paths at float64.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union["Tensor", "Parameter", np.ndarray, list, tuple, float]


class Tensor:
    """A node in the recorded computation: an ndarray plus its backward rule."""

    __slots__ = ("data", "grad", "_vjp", "parents")

    def __init__(self, data: np.ndarray, parents: tuple = (), vjp: Optional[Callable] = None):
        self.data = data
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter:
    """A named trainable leaf. grad accumulates across backward passes."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value: np.ndarray, name: str):
        self.value = value
        self.grad = np.zeros_like(value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape}, dtype={self.value.dtype})"


def as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    if isinstance(x, Parameter):
        return x.value
    return np.asarray(x)


def _accumulate(target, g: np.ndarray):
    if isinstance(target, Parameter):
        target.grad += g
    elif isinstance(target, Tensor):
        target.grad = g.copy() if target.grad is None else target.grad + g
    # plain arrays are constants


class Tape:
    """Recorded forward computation. One tape per forward pass."""

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._ids: set[int] = set()

    def record(self, t: Tensor) -> Tensor:
        self._nodes.append(t)
        self._ids.add(id(t))
        return t

    def backward(self, loss: Tensor, parameters: Optional[Sequence[Parameter]] = None):
        """Reverse-mode sweep seeding d(loss)/d(loss) = 1.

        When `parameters` is given their grads are zeroed first, so after the
        sweep parameters not on the path from the loss hold exactly zero.
        """
        if not self._nodes:
            raise RuntimeError("backward before forward: tape has no recorded computation")
        if id(loss) not in self._ids:
            raise RuntimeError("backward: loss tensor was not recorded on this tape")
        if loss.data.size != 1:
            raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
        if parameters is not None:
            for p in parameters:
                p.zero_grad()
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self._nodes):
            if node.grad is not None and node._vjp is not None:
                node._vjp(node.grad)


def _emit(tape: Optional[Tape], data, parents=(), vjp=None) -> Tensor:
    if tape is None:
        return Tensor(data)
    return tape.record(Tensor(data, parents, vjp))


# Single-row matmuls take a different BLAS path than batched ones and are not
# bitwise-consistent with them; padding to 2 rows keeps every row result
# independent of batch size (transform_point must match fpt_forward exactly).
def _rowsafe_matmul(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    if x.shape[0] == 1:
        return (np.vstack([x, x]) @ w)[:1]
    return x @ w


def linear_forward(tape: Optional[Tape], x: ArrayLike, W: ArrayLike, b: ArrayLike) -> Tensor:
    """y[i, j] = sum_k x[i, k] W[k, j] + b[j]."""
    xa, wa, ba = as_array(x), as_array(W), as_array(b)
    if xa.ndim != 2 or wa.ndim != 2 or xa.shape[1] != wa.shape[0] or ba.shape != (wa.shape[1],):
        raise ValueError(
            f"linear_forward: shapes do not conform: x {xa.shape}, W {wa.shape}, b {ba.shape}"
        )
    y = _rowsafe_matmul(xa, wa) + ba

    def vjp(g):
        if xa.shape[0] == 1:
            gp = np.vstack([g, np.zeros_like(g)])
            xp = np.vstack([xa, xa])
            _accumulate(x, (gp @ wa.T)[:1])
            _accumulate(W, xp.T @ gp)
        else:
            _accumulate(x, g @ wa.T)
            _accumulate(W, xa.T @ g)
        _accumulate(b, g.sum(axis=0))

    return _emit(tape, y, (x, W, b), vjp)


def relu_forward(tape: Optional[Tape], x: ArrayLike) -> Tensor:
    xa = as_array(x)
    y = np.maximum(xa, 0)

    def vjp(g):
        _accumulate(x, g * (xa > 0))

    return _emit(tape, y, (x,), vjp)


def maxpool_points(tape: Optional[Tape], x: ArrayLike):
    """Column-wise max over the point dimension of a [P, D] tensor.

    Returns (pooled [D], argmax [D]); argmax is the smallest row index
    attaining each max, which makes the backward scatter deterministic.
    """
    xa = as_array(x)
    if xa.ndim != 2 or xa.shape[0] < 1:
        raise ValueError(f"maxpool_points: need a nonempty [P, D] input, got shape {xa.shape}")
    argmax = np.argmax(xa, axis=0)
    pooled = xa[argmax, np.arange(xa.shape[1])]

    def vjp(g):
        gx = np.zeros_like(xa)
        np.add.at(gx, (argmax, np.arange(xa.shape[1])), g)
        _accumulate(x, gx)

    return _emit(tape, pooled, (x,), vjp), argmax


def concat_vectors(tape: Optional[Tape], a: ArrayLike, b: ArrayLike) -> Tensor:
    aa, ba = as_array(a), as_array(b)
    y = np.concatenate([aa, ba])

    def vjp(g):
        _accumulate(a, g[: aa.shape[0]])
        _accumulate(b, g[aa.shape[0]:])

    return _emit(tape, y, (a, b), vjp)


def tile_rows(tape: Optional[Tape], v: ArrayLike, n: int) -> Tensor:
    """Broadcast a [D] vector to [n, D] rows."""
    va = as_array(v)
    y = np.broadcast_to(va, (n, va.shape[0])).copy()

    def vjp(g):
        _accumulate(v, g.sum(axis=0))

    return _emit(tape, y, (v,), vjp)


def hstack_cols(tape: Optional[Tape], a: ArrayLike, b: ArrayLike) -> Tensor:
    aa, ba = as_array(a), as_array(b)
    if aa.shape[0] != ba.shape[0]:
        raise ValueError(f"hstack_cols: row counts differ: {aa.shape} vs {ba.shape}")
    y = np.hstack([aa, ba])

    def vjp(g):
        _accumulate(a, g[:, : aa.shape[1]])
        _accumulate(b, g[:, aa.shape[1]:])

    return _emit(tape, y, (a, b), vjp)


def add(tape: Optional[Tape], a: ArrayLike, b: ArrayLike) -> Tensor:
    aa, ba = as_array(a), as_array(b)
    if aa.shape != ba.shape:
        raise ValueError(f"add: shapes differ: {aa.shape} vs {ba.shape}")
    y = aa + ba

    def vjp(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _emit(tape, y, (a, b), vjp)


def scale(tape: Optional[Tape], x: ArrayLike, c: float) -> Tensor:
    xa = as_array(x)
    y = xa * xa.dtype.type(c)

    def vjp(g):
        _accumulate(x, g * xa.dtype.type(c))

    return _emit(tape, y, (x,), vjp)


def sum_all(tape: Optional[Tape], x: ArrayLike) -> Tensor:
    xa = as_array(x)
    y = np.asarray(xa.sum(), dtype=xa.dtype)

    def vjp(g):
        _accumulate(x, np.broadcast_to(g, xa.shape).astype(xa.dtype, copy=False))

    return _emit(tape, y, (x,), vjp)


def mean_of(tape: Optional[Tape], scalars: Sequence[ArrayLike]) -> Tensor:
    """Mean of scalar tensors (the per-pair batch loss reduction)."""
    if not scalars:
        raise ValueError("mean_of: empty sequence")
    vals = [as_array(s) for s in scalars]
    n = len(vals)
    y = np.asarray(sum(v.item() for v in vals) / n, dtype=vals[0].dtype)

    def vjp(g):
        share = g / n
        for s in scalars:
            _accumulate(s, share.astype(vals[0].dtype, copy=False).reshape(vals[0].shape))

    return _emit(tape, y, tuple(scalars), vjp)


def finite_difference_gradient(f: Callable[[np.ndarray], float], theta: np.ndarray,
                               h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function, per coordinate.

    The test oracle for every analytic gradient in the package; f must be
    deterministic.
    """
    if h <= 0:
        raise ValueError("finite_difference_gradient: h must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat = theta.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(theta))
        flat[i] = orig - h
        fm = float(f(theta))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
