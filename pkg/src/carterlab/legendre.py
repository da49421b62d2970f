"""Legendre functions P_l and Q_l on the real axis outside [-1, 1].

``Q_l`` for ``x > 1`` is the minimal solution of the three-term recurrence,
so it is computed by Miller's backward recurrence and normalized with the
closed form ``Q_0 = 1/2 log((x+1)/(x-1))``.
"""

from __future__ import annotations

import math

import numpy as np


def legendre_p(ell: int, x):
    """P_0..P_ell at x by upward recurrence; returns array of shape (ell+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((ell + 1,) + x.shape)
    out[0] = 1.0
    if ell >= 1:
        out[1] = x
    for n in range(1, ell):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def _miller_start(ell: int, x: float, eps: float = 1e-17) -> int:
    zeta = x + math.sqrt(x * x - 1.0)
    lz = math.log(zeta)
    extra = int(math.ceil(-math.log(eps) / (2 * lz))) + 10
    return ell + min(extra, 2_000_000)


def legendre_q(ell: int, x: float) -> np.ndarray:
    """Q_0..Q_ell at a scalar x > 1 (Miller backward recurrence)."""
    x = float(x)
    if not x > 1.0:
        raise ValueError("legendre_q is implemented for x > 1")
    # near x = 1 both recurrence solutions grow alike (zeta ~ 1), so the upward
    # recurrence is stable there while Miller would need a huge start index
    if 2 * ell * math.log(x + math.sqrt(x * x - 1.0)) < math.log(100.0):
        return legendre_q_forward(ell, x)
    top = _miller_start(ell, x)
    q_next, q_cur = 0.0, 1e-300
    vals = np.empty(ell + 1)
    for n in range(top, 0, -1):
        # Q_{n-1} = ((2n+1) x Q_n - (n+1) Q_{n+1}) / n
        q_prev = ((2 * n + 1) * x * q_cur - (n + 1) * q_next) / n
        q_next, q_cur = q_cur, q_prev
        if n - 1 <= ell:
            vals[n - 1] = q_cur
        if abs(q_cur) > 1e250:  # rescale to avoid overflow
            q_next *= 1e-250
            q_cur *= 1e-250
            vals[max(n - 1, 0): ell + 1] *= 1e-250
    if top <= ell:  # pragma: no cover - top is always above ell
        raise RuntimeError("Miller start index too small")
    q0 = 0.5 * math.log1p(2.0 / (x - 1.0))
    return vals * (q0 / vals[0])


def legendre_q_forward(ell: int, x: float) -> np.ndarray:
    """Q_0..Q_ell by upward recurrence; accurate only while zeta^(2 ell) stays small."""
    q = np.empty(ell + 1)
    q[0] = 0.5 * math.log1p(2.0 / (x - 1.0))
    if ell >= 1:
        q[1] = x * q[0] - 1.0
    for n in range(1, ell):
        q[n + 1] = ((2 * n + 1) * x * q[n] - n * q[n - 1]) / (n + 1)
    return q


def derivative_from_recurrence(vals: np.ndarray, x: float) -> np.ndarray:
    """F_l' from (x^2 - 1) F_l' = l (x F_l - F_{l-1}), valid for P and Q alike."""
    d = np.empty_like(vals)
    d[0] = np.nan
    for n in range(1, len(vals)):
        d[n] = n * (x * vals[n] - vals[n - 1]) / (x * x - 1.0)
    return d


def q_derivative(ell: int, x: float) -> float:
    q = legendre_q(max(ell, 1), x)
    if ell == 0:
        return 1.0 / (1.0 - x * x)
    return float(derivative_from_recurrence(q, x)[ell])


def p_derivative(ell: int, x: float) -> float:
    if ell == 0:
        return 0.0
    p = legendre_p(ell, np.array(x))
    return float(derivative_from_recurrence(p, x)[ell])


def wronskian_pq(ell: int, x: float) -> float:
    """P_l Q_l' - P_l' Q_l; equals 1/(1 - x^2) for every l."""
    p = float(legendre_p(ell, np.array(x))[ell])
    q = float(legendre_q(max(ell, 1), x)[ell])
    return p * q_derivative(ell, x) - p_derivative(ell, x) * q
