"""Pure numpy forward/backward unrolls.

Reference backend, used when the compiled ``_ckernels`` extension is not
available.  Both backends share the flat parameter layout described in
:func:`param_layout` and the tape layout below:

x0      (T, d)           layer-0 inputs, encoder rows then decoder rows
hs      (L, T+1, h)      hidden states, slot 0 is the zero initial state
cs      (L, T+1, h)      LSTM cell states (zeros for RNN)
acts    (L, T, G*h)      LSTM activated gates i, f, o, g (RNN: hidden states)
"""
from __future__ import annotations

import numpy as np

RNN = 0
LSTM = 1


def n_gates(kind: int) -> int:
    return 4 if kind == LSTM else 1


def param_layout(kind: int, n_layers: int, hidden: int, input_size: int):
    """Offsets of every block inside the flat parameter vector.

    Returns ``(layers, head_w, head_b, total)`` where ``layers`` is a list of
    ``(wx, wh, b, d)`` offsets plus the layer input size.
    """
    g = n_gates(kind)
    off = 0
    layers = []
    for layer in range(n_layers):
        d = input_size if layer == 0 else hidden
        wx = off
        wh = wx + g * hidden * d
        b = wh + g * hidden * hidden
        off = b + g * hidden
        layers.append((wx, wh, b, d))
    head_w = off
    head_b = head_w + hidden
    return layers, head_w, head_b, head_b + 1


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def build_inputs(past, future, input_size, dtype=np.float64):
    lookback, horizon = past.shape[0], future.shape[0]
    x0 = np.zeros((lookback + horizon, input_size), dtype=dtype)
    x0[:lookback] = past
    x0[lookback:, : future.shape[1]] = future
    return x0


def forward(kind, n_layers, hidden, input_size, params, past, future):
    layers, hw, hb, _ = param_layout(kind, n_layers, hidden, input_size)
    g = n_gates(kind)
    lookback, horizon = past.shape[0], future.shape[0]
    T = lookback + horizon
    # dtype follows params so the check harness can run in extended precision
    dt = params.dtype
    x0 = build_inputs(past, future, input_size, dt)
    hs = np.zeros((n_layers, T + 1, hidden), dtype=dt)
    cs = np.zeros((n_layers, T + 1, hidden), dtype=dt)
    acts = np.zeros((n_layers, T, g * hidden), dtype=dt)
    xs = x0
    for layer, (wx, wh, b, d) in enumerate(layers):
        Wx = params[wx:wh].reshape(g * hidden, d)
        Wh = params[wh:b].reshape(g * hidden, hidden)
        bias = params[b : b + g * hidden]
        pre_x = xs @ Wx.T + bias
        h = hs[layer]
        c = cs[layer]
        a = acts[layer]
        for t in range(T):
            z = pre_x[t] + Wh @ h[t]
            if kind == LSTM:
                ifo = _sigmoid(z[: 3 * hidden])
                gg = np.tanh(z[3 * hidden :])
                i, f, o = ifo[:hidden], ifo[hidden : 2 * hidden], ifo[2 * hidden :]
                c[t + 1] = f * c[t] + i * gg
                h[t + 1] = o * np.tanh(c[t + 1])
                a[t, : 3 * hidden] = ifo
                a[t, 3 * hidden :] = gg
            else:
                h[t + 1] = np.tanh(z)
                a[t] = h[t + 1]
        xs = h[1:]
    top = hs[-1, lookback + 1 :]
    preds = top @ params[hw:hb] + params[hb]
    return preds, x0, hs, cs, acts


def backward(kind, n_layers, hidden, input_size, params, x0, hs, cs, acts,
             lookback, dpreds):
    layers, hw, hb, total = param_layout(kind, n_layers, hidden, input_size)
    g = n_gates(kind)
    T = x0.shape[0]
    grad = np.zeros(total)
    top = hs[-1, lookback + 1 :]
    grad[hw:hb] = dpreds @ top
    grad[hb] = dpreds.sum()
    dh_out = np.zeros((T, hidden))
    dh_out[lookback:] = np.outer(dpreds, params[hw:hb])
    H = hidden
    for layer in range(n_layers - 1, -1, -1):
        wx, wh, b, d = layers[layer]
        Wx = params[wx:wh].reshape(g * H, d)
        Wh = params[wh:b].reshape(g * H, H)
        xs = x0 if layer == 0 else hs[layer - 1, 1:]
        h = hs[layer]
        c = cs[layer]
        a = acts[layer]
        dz_all = np.zeros((T, g * H))
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(T - 1, -1, -1):
            dh = dh_out[t] + dh_next
            if kind == LSTM:
                i = a[t, :H]
                f = a[t, H : 2 * H]
                o = a[t, 2 * H : 3 * H]
                gg = a[t, 3 * H :]
                tc = np.tanh(c[t + 1])
                dc = dc_next + dh * o * (1.0 - tc * tc)
                dz = dz_all[t]
                dz[:H] = dc * gg * i * (1.0 - i)
                dz[H : 2 * H] = dc * c[t] * f * (1.0 - f)
                dz[2 * H : 3 * H] = dh * tc * o * (1.0 - o)
                dz[3 * H :] = dc * i * (1.0 - gg * gg)
                dc_next = dc * f
            else:
                ht = a[t]
                dz = dz_all[t]
                dz[:] = dh * (1.0 - ht * ht)
            dh_next = Wh.T @ dz
        grad[wx:wh] = (dz_all.T @ xs).ravel()
        grad[wh:b] = (dz_all.T @ h[:-1]).ravel()
        grad[b : b + g * H] = dz_all.sum(axis=0)
        if layer > 0:
            dh_out = dz_all @ Wx
    return grad
