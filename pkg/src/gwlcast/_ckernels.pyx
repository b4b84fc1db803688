# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward/backward unrolls.

Same contract and tape layout as ``gwlcast._pykernels``; loops are written
out element by element so the per-sample cost is a few hundred microseconds.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

cdef enum:
    RNN = 0
    LSTM = 1


cdef inline double _sig(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef void _layer_offsets(int kind, int n_layers, int hidden, int input_size,
                         Py_ssize_t[:, ::1] offs, Py_ssize_t* head_w) noexcept nogil:
    cdef int g = 4 if kind == LSTM else 1
    cdef Py_ssize_t off = 0
    cdef int layer, d
    for layer in range(n_layers):
        d = input_size if layer == 0 else hidden
        offs[layer, 0] = off
        offs[layer, 1] = off + g * hidden * d
        offs[layer, 2] = offs[layer, 1] + g * hidden * hidden
        offs[layer, 3] = d
        off = offs[layer, 2] + g * hidden
    head_w[0] = off


def forward(int kind, int n_layers, int hidden, int input_size,
            const double[::1] params, const double[:, ::1] past,
            const double[:, ::1] future):
    cdef int g = 4 if kind == LSTM else 1
    cdef int lookback = past.shape[0]
    cdef int horizon = future.shape[0]
    cdef int T = lookback + horizon
    cdef int nf = future.shape[1]
    cdef Py_ssize_t[:, ::1] offs = np.zeros((n_layers, 4), dtype=np.intp)
    cdef Py_ssize_t hw
    _layer_offsets(kind, n_layers, hidden, input_size, offs, &hw)

    x0_arr = np.zeros((T, input_size))
    hs_arr = np.zeros((n_layers, T + 1, hidden))
    cs_arr = np.zeros((n_layers, T + 1, hidden))
    acts_arr = np.zeros((n_layers, T, g * hidden))
    preds_arr = np.zeros(horizon)
    z_arr = np.zeros(g * hidden)
    cdef double[:, ::1] x0 = x0_arr
    cdef double[:, :, ::1] hs = hs_arr
    cdef double[:, :, ::1] cs = cs_arr
    cdef double[:, :, ::1] acts = acts_arr
    cdef double[::1] preds = preds_arr
    cdef double[::1] z = z_arr

    cdef int t, j, k, layer, d, H = hidden
    cdef Py_ssize_t wx, wh, b
    cdef double s, iv, fv, ov, gv
    with nogil:
        for t in range(lookback):
            for j in range(past.shape[1]):
                x0[t, j] = past[t, j]
        for t in range(horizon):
            for j in range(nf):
                x0[lookback + t, j] = future[t, j]
        for layer in range(n_layers):
            wx = offs[layer, 0]
            wh = offs[layer, 1]
            b = offs[layer, 2]
            d = <int>offs[layer, 3]
            for t in range(T):
                for j in range(g * H):
                    s = params[b + j]
                    if layer == 0:
                        for k in range(d):
                            s = s + params[wx + j * d + k] * x0[t, k]
                    else:
                        for k in range(d):
                            s = s + params[wx + j * d + k] * hs[layer - 1, t + 1, k]
                    for k in range(H):
                        s = s + params[wh + j * H + k] * hs[layer, t, k]
                    z[j] = s
                if kind == LSTM:
                    for j in range(H):
                        iv = _sig(z[j])
                        fv = _sig(z[H + j])
                        ov = _sig(z[2 * H + j])
                        gv = tanh(z[3 * H + j])
                        acts[layer, t, j] = iv
                        acts[layer, t, H + j] = fv
                        acts[layer, t, 2 * H + j] = ov
                        acts[layer, t, 3 * H + j] = gv
                        cs[layer, t + 1, j] = fv * cs[layer, t, j] + iv * gv
                        hs[layer, t + 1, j] = ov * tanh(cs[layer, t + 1, j])
                else:
                    for j in range(H):
                        hs[layer, t + 1, j] = tanh(z[j])
                        acts[layer, t, j] = hs[layer, t + 1, j]
        for t in range(horizon):
            s = 0.0
            for j in range(H):
                s = s + params[hw + j] * hs[n_layers - 1, lookback + 1 + t, j]
            preds[t] = s + params[hw + H]
    return preds_arr, x0_arr, hs_arr, cs_arr, acts_arr


def backward(int kind, int n_layers, int hidden, int input_size,
             const double[::1] params, const double[:, ::1] x0,
             const double[:, :, ::1] hs, const double[:, :, ::1] cs,
             const double[:, :, ::1] acts, int lookback,
             const double[::1] dpreds):
    cdef int g = 4 if kind == LSTM else 1
    cdef int T = x0.shape[0]
    cdef int horizon = dpreds.shape[0]
    cdef int H = hidden
    cdef Py_ssize_t[:, ::1] offs = np.zeros((n_layers, 4), dtype=np.intp)
    cdef Py_ssize_t hw
    _layer_offsets(kind, n_layers, hidden, input_size, offs, &hw)

    grad_arr = np.zeros(hw + H + 1)
    dh_out_arr = np.zeros((T, H))
    dh_below_arr = np.zeros((T, H))
    dz_arr = np.zeros(g * H)
    dh_next_arr = np.zeros(H)
    dc_next_arr = np.zeros(H)
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] dh_out = dh_out_arr
    cdef double[:, ::1] dh_below = dh_below_arr
    cdef double[::1] dz = dz_arr
    cdef double[::1] dh_next = dh_next_arr
    cdef double[::1] dc_next = dc_next_arr

    cdef int t, j, k, layer, d
    cdef Py_ssize_t wx, wh, b
    cdef double dp, dh, dc, tc, iv, fv, ov, gv, s, xv
    with nogil:
        for t in range(horizon):
            dp = dpreds[t]
            for j in range(H):
                grad[hw + j] += dp * hs[n_layers - 1, lookback + 1 + t, j]
                dh_out[lookback + t, j] = dp * params[hw + j]
            grad[hw + H] += dp
        for layer in range(n_layers - 1, -1, -1):
            wx = offs[layer, 0]
            wh = offs[layer, 1]
            b = offs[layer, 2]
            d = <int>offs[layer, 3]
            for j in range(H):
                dh_next[j] = 0.0
                dc_next[j] = 0.0
            if layer > 0:
                for t in range(T):
                    for j in range(H):
                        dh_below[t, j] = 0.0
            for t in range(T - 1, -1, -1):
                if kind == LSTM:
                    for j in range(H):
                        dh = dh_out[t, j] + dh_next[j]
                        iv = acts[layer, t, j]
                        fv = acts[layer, t, H + j]
                        ov = acts[layer, t, 2 * H + j]
                        gv = acts[layer, t, 3 * H + j]
                        tc = tanh(cs[layer, t + 1, j])
                        dc = dc_next[j] + dh * ov * (1.0 - tc * tc)
                        dz[j] = dc * gv * iv * (1.0 - iv)
                        dz[H + j] = dc * cs[layer, t, j] * fv * (1.0 - fv)
                        dz[2 * H + j] = dh * tc * ov * (1.0 - ov)
                        dz[3 * H + j] = dc * iv * (1.0 - gv * gv)
                        dc_next[j] = dc * fv
                else:
                    for j in range(H):
                        dh = dh_out[t, j] + dh_next[j]
                        dz[j] = dh * (1.0 - acts[layer, t, j] * acts[layer, t, j])
                for k in range(H):
                    dh_next[k] = 0.0
                for j in range(g * H):
                    s = dz[j]
                    grad[b + j] += s
                    for k in range(d):
                        if layer == 0:
                            xv = x0[t, k]
                        else:
                            xv = hs[layer - 1, t + 1, k]
                        grad[wx + j * d + k] += s * xv
                    for k in range(H):
                        grad[wh + j * H + k] += s * hs[layer, t, k]
                        dh_next[k] += params[wh + j * H + k] * s
                    if layer > 0:
                        for k in range(d):
                            dh_below[t, k] += params[wx + j * d + k] * s
            if layer > 0:
                for t in range(T):
                    for j in range(H):
                        dh_out[t, j] = dh_below[t, j]
    return grad_arr
