# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused LSTM cell (forward and backward).

Same contract as ``hmtl._kernels_py``. Gate nonlinearities use numpy's
vectorised ufuncs in place; the cell update and the whole backward pass are
fused C loops, which removes the temporaries the fallback allocates.
"""

import numpy as np


def lstm_cell_forward(gates_in, c_prev_in):
    gates_arr = np.ascontiguousarray(gates_in, dtype=np.float64)
    cdef double[:, ::1] c_prev = np.ascontiguousarray(c_prev_in, dtype=np.float64)
    cdef Py_ssize_t B = c_prev.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]
    if gates_arr.shape[0] != B or gates_arr.shape[1] != 4 * H:
        raise ValueError("gate block must be (B, 4H) for c of shape (B, H)")

    # transcendentals go through numpy's vectorised ufuncs (in place, no
    # temporaries); the elementwise cell update is a fused C loop
    act_arr = np.empty((B, 4 * H))
    sig = act_arr[:, : 3 * H]
    np.negative(gates_arr[:, : 3 * H], out=sig)
    with np.errstate(over="ignore"):
        np.exp(sig, out=sig)
    np.add(sig, 1.0, out=sig)
    np.reciprocal(sig, out=sig)
    np.tanh(gates_arr[:, 3 * H :], out=act_arr[:, 3 * H :])

    h_arr = np.empty((B, H))
    c_arr = np.empty((B, H))
    cdef double[:, ::1] act = act_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] h = h_arr
    cdef Py_ssize_t b, j
    with nogil:
        for b in range(B):
            for j in range(H):
                c[b, j] = act[b, H + j] * c_prev[b, j] + act[b, j] * act[b, 3 * H + j]
    tc_arr = np.tanh(c_arr)
    cdef double[:, ::1] tc = tc_arr
    with nogil:
        for b in range(B):
            for j in range(H):
                h[b, j] = act[b, 2 * H + j] * tc[b, j]
    return h_arr, c_arr, act_arr, tc_arr


def lstm_cell_backward(dh_in, dc_in, c_prev_in, act_in, tc_in):
    cdef double[:, ::1] dh = np.ascontiguousarray(dh_in, dtype=np.float64)
    cdef double[:, ::1] dc = np.ascontiguousarray(dc_in, dtype=np.float64)
    cdef double[:, ::1] c_prev = np.ascontiguousarray(c_prev_in, dtype=np.float64)
    cdef double[:, ::1] act = np.ascontiguousarray(act_in, dtype=np.float64)
    cdef double[:, ::1] tc = np.ascontiguousarray(tc_in, dtype=np.float64)
    cdef Py_ssize_t B = c_prev.shape[0]
    cdef Py_ssize_t H = c_prev.shape[1]

    dgates_arr = np.empty((B, 4 * H))
    dc_prev_arr = np.empty((B, H))
    cdef double[:, ::1] dgates = dgates_arr
    cdef double[:, ::1] dc_prev = dc_prev_arr
    cdef Py_ssize_t b, j
    cdef double i, f, o, g, t, dct
    with nogil:
        for b in range(B):
            for j in range(H):
                i = act[b, j]
                f = act[b, H + j]
                o = act[b, 2 * H + j]
                g = act[b, 3 * H + j]
                t = tc[b, j]
                dct = dc[b, j] + dh[b, j] * o * (1.0 - t * t)
                dgates[b, j] = dct * g * i * (1.0 - i)
                dgates[b, H + j] = dct * c_prev[b, j] * f * (1.0 - f)
                dgates[b, 2 * H + j] = dh[b, j] * t * o * (1.0 - o)
                dgates[b, 3 * H + j] = dct * i * (1.0 - g * g)
                dc_prev[b, j] = dct * f
    return dgates_arr, dc_prev_arr
