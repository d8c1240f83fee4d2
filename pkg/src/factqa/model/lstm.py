"""Gated recurrent sequence encoder (forward pass + hand-rolled BPTT).

Only the final hidden state of each direction feeds the rest of the
network, so the backward pass starts from a single d-dimensional seed
gradient per direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmCache:
    """Per-step activations kept for BPTT. All arrays are (T, d)."""

    xs: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def lstm_forward(xs: np.ndarray, Wx: np.ndarray, Wh: np.ndarray,
                 b: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """Run the gated recurrence over xs (T, d); return last hidden state."""
    T, d = xs.shape
    h = np.zeros(d)
    c = np.zeros(d)
    cache = LstmCache(
        xs=xs,
        h_prev=np.zeros((T, d)), c_prev=np.zeros((T, d)),
        i=np.zeros((T, d)), f=np.zeros((T, d)), o=np.zeros((T, d)),
        g=np.zeros((T, d)), c=np.zeros((T, d)), tanh_c=np.zeros((T, d)),
    )
    for t in range(T):
        cache.h_prev[t] = h
        cache.c_prev[t] = c
        z = Wx @ xs[t] + Wh @ h + b
        i = _sigmoid(z[:d])
        f = _sigmoid(z[d:2 * d])
        o = _sigmoid(z[2 * d:3 * d])
        g = np.tanh(z[3 * d:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.i[t], cache.f[t], cache.o[t], cache.g[t] = i, f, o, g
        cache.c[t], cache.tanh_c[t] = c, tc
    return h, cache


def lstm_backward(dh_last: np.ndarray, cache: LstmCache, Wx: np.ndarray,
                  Wh: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT from the gradient of the last hidden state.

    Returns (dWx, dWh, db, dxs) with dxs of shape (T, d).
    """
    T, d = cache.xs.shape
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * d)
    dxs = np.zeros((T, d))
    dh = dh_last.copy()
    dc = np.zeros(d)
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache.i[t], cache.f[t], cache.o[t], cache.g[t]
        tc = cache.tanh_c[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        df = dc * cache.c_prev[t]
        di = dc * g
        dg = dc * i
        dc = dc * f
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ])
        dWx += np.outer(dz, cache.xs[t])
        dWh += np.outer(dz, cache.h_prev[t])
        db += dz
        dxs[t] = Wx.T @ dz
        dh = Wh.T @ dz
    return dWx, dWh, db, dxs
