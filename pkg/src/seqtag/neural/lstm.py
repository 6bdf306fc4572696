"""LSTM cell, bidirectional encoding, and backpropagation through time.

Gate weights are stacked row-wise in (input, forget, output, candidate)
order: W is (4H, D), U is (4H, H), b is (4H,). Scans start from zero
hidden and cell states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    W: np.ndarray  # (4H, D) input-to-hidden, gates stacked i|f|o|g
    U: np.ndarray  # (4H, H) hidden-to-hidden
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        four_h, _ = self.W.shape
        if four_h % 4:
            raise ValueError("first weight dimension must be 4*H")
        h = four_h // 4
        if self.U.shape != (four_h, h) or self.b.shape != (four_h,):
            raise ValueError("inconsistent LSTM parameter shapes")

    @property
    def hidden_size(self):
        return self.W.shape[0] // 4

    @property
    def input_size(self):
        return self.W.shape[1]

    def gate(self, name):
        """View of one gate's input weights: 'i', 'f', 'o' or 'g'."""
        h = self.hidden_size
        offset = "ifog".index(name) * h
        return self.W[offset : offset + h]

    @classmethod
    def init(cls, input_size, hidden_size, rng):
        """Uniform gate weights in [-1/sqrt(H), 1/sqrt(H)]; forget-gate
        bias 1, other biases 0."""
        bound = 1.0 / np.sqrt(hidden_size)
        w = rng.uniform(-bound, bound, size=(4 * hidden_size, input_size))
        u = rng.uniform(-bound, bound, size=(4 * hidden_size, hidden_size))
        b = np.zeros(4 * hidden_size)
        b[hidden_size : 2 * hidden_size] = 1.0
        return cls(w, u, b)

    def copy(self):
        return LstmParams(self.W.copy(), self.U.copy(), self.b.copy())


def lstm_cell(x, h_prev, c_prev, params):
    """One step: gates from x and h_prev, new cell and hidden states."""
    h = params.hidden_size
    if x.shape != (params.input_size,) or h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ValueError("lstm_cell input shapes do not match the parameters")
    z = params.W @ x + params.U @ h_prev + params.b
    i = sigmoid(z[:h])
    f = sigmoid(z[h : 2 * h])
    o = sigmoid(z[2 * h : 3 * h])
    g = np.tanh(z[3 * h :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def lstm_forward(xs, params):
    """Scan a (T, D) input from zero states; returns hidden states and
    the per-step cache needed for the backward pass."""
    n_steps = xs.shape[0]
    h_size = params.hidden_size
    hs = np.zeros((n_steps, h_size))
    cache = []
    h = np.zeros(h_size)
    c = np.zeros(h_size)
    for t in range(n_steps):
        z = params.W @ xs[t] + params.U @ h + params.b
        i = sigmoid(z[:h_size])
        f = sigmoid(z[h_size : 2 * h_size])
        o = sigmoid(z[2 * h_size : 3 * h_size])
        g = np.tanh(z[3 * h_size :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        cache.append((xs[t], h, c, i, f, o, g, tanh_c))
        h, c = h_new, c_new
        hs[t] = h
    return hs, cache


def lstm_backward(cache, params, dhs):
    """BPTT given upstream gradients on every hidden state.

    Returns gradients on the inputs and a dict with keys "W", "U", "b".
    """
    n_steps = len(cache)
    h_size = params.hidden_size
    d_w = np.zeros_like(params.W)
    d_u = np.zeros_like(params.U)
    d_b = np.zeros_like(params.b)
    dxs = np.zeros((n_steps, params.input_size))
    dh_next = np.zeros(h_size)
    dc_next = np.zeros(h_size)
    for t in range(n_steps - 1, -1, -1):
        x, h_prev, c_prev, i, f, o, g, tanh_c = cache[t]
        dh = dhs[t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c**2) + dc_next
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g**2),
            ]
        )
        d_w += np.outer(dz, x)
        d_u += np.outer(dz, h_prev)
        d_b += dz
        dxs[t] = params.W.T @ dz
        dh_next = params.U.T @ dz
    return dxs, {"W": d_w, "U": d_u, "b": d_b}


def bilstm_encode(xs, fwd, bwd):
    """Concatenate forward and reversed-scan hidden states per position."""
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ValueError("need a (T, D) input with T >= 1")
    hs_f, _ = lstm_forward(xs, fwd)
    hs_b, _ = lstm_forward(xs[::-1], bwd)
    return np.concatenate([hs_f, hs_b[::-1]], axis=1)
