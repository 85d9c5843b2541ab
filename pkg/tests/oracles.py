"""Independent dense-truncation oracles.

These build the generator entry by entry from the verbal transition rules,
deliberately not sharing any code with the package's block constructors, and
solve the truncated global balance equations directly.
"""

from __future__ import annotations

import math

import numpy as np

from retrialq import ModelParams


def dense_generator(params: ModelParams, jcap: int) -> np.ndarray:
    """Truncated CTMC generator over states (i busy, j in orbit), j <= jcap.

    Transitions that would push the orbit above jcap are dropped, which
    keeps the generator conservative (a censoring-style truncation).
    """
    s = params.s
    n = (jcap + 1) * (s + 1)
    q = np.zeros((n, n))

    def idx(i: int, j: int) -> int:
        return j * (s + 1) + i

    for j in range(jcap + 1):
        for i in range(s + 1):
            row = idx(i, j)

            def add(i2: int, j2: int, rate: float) -> None:
                if rate > 0.0 and j2 <= jcap:
                    q[row, idx(i2, j2)] += rate

            if i < s:
                add(i + 1, j, params.lam * params.p_a)
                add(i, j + 1, params.lam * params.pt_a)
            else:
                add(s, j + 1, params.lam * params.at_0)
            if i > 0:
                add(i - 1, j, i * params.mu * params.thb)
                add(i - 1, j + 1, i * params.mu * params.tht)
            if j > 0:
                if i < s:
                    add(i + 1, j - 1, j * params.nu * params.p)
                    add(i, j - 1, j * params.nu * params.pb)
                else:
                    add(s, j - 1, j * params.nu * params.ab)

    np.fill_diagonal(q, -q.sum(axis=1))
    return q


def dense_solve(params: ModelParams, jcap: int) -> np.ndarray:
    """Stationary distribution of the truncated chain, shape (jcap+1, s+1)."""
    q = dense_generator(params, jcap)
    n = q.shape[0]
    m = q.T.copy()
    m[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(m, rhs)
    return pi.reshape(jcap + 1, params.s + 1)


def erlang_b(s: int, offered: float) -> float:
    """Erlang loss probability B(s, a) by the stable recursion."""
    b = 1.0
    for k in range(1, s + 1):
        b = offered * b / (k + offered * b)
    return b


def erlang_weights(s: int, offered: float) -> np.ndarray:
    """Truncated Poisson weights a^i / i! on 0..s-1, normalized."""
    w = np.array([offered ** i / math.factorial(i) for i in range(s)])
    return w / w.sum()


def mmoo_dense_mean(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                    ncap: int) -> np.ndarray:
    """Conditional first moments of a Markov-modulated M/M/inf queue.

    Dense truncation over (customers, phase) with level cap ncap; returns
    the vector (E[Q; phase = i])_i for comparison with the recursion.
    """
    nph = b.shape[0]
    n = (ncap + 1) * nph
    q = np.zeros((n, n))

    def idx(lvl: int, ph: int) -> int:
        return lvl * nph + ph

    for lvl in range(ncap + 1):
        for ph in range(nph):
            row = idx(lvl, ph)
            for ph2 in range(nph):
                if ph2 != ph and b[ph, ph2] > 0:
                    q[row, idx(lvl, ph2)] += b[ph, ph2]
            if lvl < ncap:
                q[row, idx(lvl + 1, ph)] += a[ph, ph]
            if lvl > 0:
                q[row, idx(lvl - 1, ph)] += lvl * c[ph, ph]

    np.fill_diagonal(q, q.diagonal() - q.sum(axis=1))
    m = q.T.copy()
    m[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(m, rhs).reshape(ncap + 1, nph)
    levels = np.arange(ncap + 1, dtype=float)
    return levels @ pi
