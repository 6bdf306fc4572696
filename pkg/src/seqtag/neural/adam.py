"""Adam with bias correction, for dense parameter dicts and for sparse
row updates into embedding matrices.

One AdamState serves a whole training run; the timestep advances once
per optimizer step and is shared by dense and row-sparse updates, so
bias correction stays consistent. Rows not touched by a batch are left
alone (lazy updates keep frozen rows byte-identical).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    def slot(self, name, like):
        if name not in self.m:
            self.m[name] = np.zeros_like(like)
            self.v[name] = np.zeros_like(like)
        return self.m[name], self.v[name]


def adam_step(params, grads, state, learning_rate=0.001, beta1=0.9, beta2=0.999,
              epsilon=1e-8, advance=True):
    """Update every named parameter with its gradient, in place.

    Set advance=False when the same state also receives sparse row
    updates in this step and the timestep was already advanced.
    """
    if advance:
        state.t += 1
    t = state.t
    for name, grad in grads.items():
        param = params[name]
        if param.shape != grad.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        m, v = state.slot(name, param)
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad**2
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        param -= learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
    return params, state


def adam_step_rows(matrix, row_grads, state, name, learning_rate=0.001,
                   beta1=0.9, beta2=0.999, epsilon=1e-8):
    """Adam on selected rows of a matrix; untouched rows do not move."""
    if not row_grads:
        return
    m, v = state.slot(name, matrix)
    t = state.t
    for row, grad in row_grads.items():
        m[row] *= beta1
        m[row] += (1.0 - beta1) * grad
        v[row] *= beta2
        v[row] += (1.0 - beta2) * grad**2
        m_hat = m[row] / (1.0 - beta1**t)
        v_hat = v[row] / (1.0 - beta2**t)
        matrix[row] -= learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
