"""Pure-numpy exact nearest-neighbor kernel (fallback for fpt._nnkernel).

Arithmetic is kept identical to the compiled kernel: squared distances are
accumulated as ((dx*dx + dy*dy) + dz*dz) in float64 and ties resolve to the
smallest target index, so both backends return bitwise-equal results.
"""

import numpy as np

_BLOCK = 256  # queries per block; bounds the [block, M, 3] scratch


def nn_indices(query: np.ndarray, target: np.ndarray):
    n = query.shape[0]
    idx = np.empty(n, dtype=np.int64)
    sqd = np.empty(n, dtype=np.float64)
    for s in range(0, n, _BLOCK):
        q = query[s:s + _BLOCK]
        d = ((q[:, None, :] - target[None, :, :]) ** 2).sum(axis=2)
        k = d.argmin(axis=1)  # argmin returns the first (smallest) index on ties
        idx[s:s + len(k)] = k
        sqd[s:s + len(k)] = d[np.arange(len(k)), k]
    return idx, sqd
