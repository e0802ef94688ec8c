# Exact brute-force nearest neighbors over 3D points.
#
# Must stay bitwise-equal to fpt._nn_python: double accumulation in the
# order ((dx*dx + dy*dy) + dz*dz), strict less-than comparison (smallest
# index wins ties), and the build disables FP contraction.

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def nn_indices(const double[:, ::1] query, const double[:, ::1] target):
    cdef Py_ssize_t n = query.shape[0]
    cdef Py_ssize_t m = target.shape[0]
    idx_arr = np.empty(n, dtype=np.int64)
    sqd_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] sqd = sqd_arr
    cdef Py_ssize_t i, j, best
    cdef double qx, qy, qz, dx, dy, dz, d, best_d
    with nogil:
        for i in range(n):
            qx = query[i, 0]
            qy = query[i, 1]
            qz = query[i, 2]
            best = 0
            best_d = INFINITY
            for j in range(m):
                dx = qx - target[j, 0]
                dy = qy - target[j, 1]
                dz = qz - target[j, 2]
                d = (dx * dx + dy * dy) + dz * dz
                if d < best_d:
                    best_d = d
                    best = j
            idx[i] = best
            sqd[i] = best_d
    return idx_arr, sqd_arr
