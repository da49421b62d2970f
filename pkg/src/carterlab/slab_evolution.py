"""Energy-conserving evolution of the per-mode slab wave equation.

The semi-discrete system ``M_A u_tt - 2 i m G_B u_t + H u = 0`` is advanced
with the implicit midpoint rule, which preserves the quadratic energy

    E = 1/2 u_t^H M_A u_t + 1/2 u^H H u

up to linear-solver rounding, because the gyroscopic coupling is skew.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, InputError, LinearSolveFailure, WrongMode
from .slab_spectral import OperatorPair, assemble_operators, flat_slab, lowest_eigenpairs, weighted_mean


@dataclass(frozen=True)
class FieldState:
    u: np.ndarray
    ut: np.ndarray
    t: float
    ops: OperatorPair = field(repr=False)

    @property
    def m(self) -> int:
        return self.ops.m


@dataclass(frozen=True)
class EnergyReport:
    E: float
    kinetic: float
    potential: float
    mean_u: complex  # Pi_0 u as a scalar
    mean_ut: complex
    drift: float | None = None  # relative to a reference energy, if given


def init_state(ops: OperatorPair, u0, u1, t0: float = 0.0) -> FieldState:
    u0 = np.asarray(u0, dtype=complex).ravel()
    u1 = np.asarray(u1, dtype=complex).ravel()
    if u0.size != ops.n or u1.size != ops.n:
        raise DimensionMismatch(f"expected vectors of length {ops.n}, got {u0.size} and {u1.size}")
    return FieldState(u0.copy(), u1.copy(), float(t0), ops)


def energy_and_average(state: FieldState, reference: float | None = None) -> EnergyReport:
    ops = state.ops
    kin = 0.5 * float(np.real(ops.inner(state.ut, state.ut)))
    pot = 0.5 * ops.quad(state.u)
    E = kin + pot
    drift = None
    if reference is not None and reference != 0:
        drift = abs(E - reference) / abs(reference)
    return EnergyReport(E, kin, pot, weighted_mean(ops, state.u), weighted_mean(ops, state.ut), drift)


class MidpointStepper:
    """Implicit midpoint with a sparse LU factorization reused across steps.

    The velocity update solves

        (M + dt^2/4 H - i m dt G) v1 = (M - dt^2/4 H + i m dt G) v0 - dt H u0,

    and then ``u1 = u0 + dt/2 (v0 + v1)``.
    """

    def __init__(self, ops: OperatorPair, dt: float):
        if not dt or not math.isfinite(dt):
            raise InputError("dt must be finite and nonzero")
        self.ops = ops
        self.dt = float(dt)
        m = ops.m
        d2 = 0.25 * self.dt * self.dt
        gyro = sp.diags(1j * m * self.dt * ops.gyro) if m else None
        lhs = ops.M + d2 * ops.H
        self._rhs = ops.M - d2 * ops.H
        if gyro is not None:
            lhs = lhs - gyro
            self._rhs = self._rhs + gyro
        self._rhs = self._rhs.tocsr()
        dtype = complex if m else float
        try:
            self._lu = spla.splu(lhs.astype(dtype).tocsc())
        except RuntimeError as exc:
            raise LinearSolveFailure(f"factorization failed: {exc}") from exc
        self._real = m == 0

    def _solve(self, b: np.ndarray) -> np.ndarray:
        if self._real:
            # real factorization applied to real and imaginary parts separately
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(np.ascontiguousarray(b.imag))
        return self._lu.solve(b)

    def step(self, state: FieldState) -> FieldState:
        if state.ops is not self.ops:
            raise InputError("state belongs to a different operator pair")
        ops, dt = self.ops, self.dt
        b = self._rhs @ state.ut - dt * (ops.H @ state.u)
        v1 = self._solve(b)
        if not np.all(np.isfinite(v1)):
            raise LinearSolveFailure("non-finite solution in midpoint step")
        u1 = state.u + 0.5 * dt * (state.ut + v1)
        return FieldState(u1, v1, state.t + dt, ops)


_STEPPERS: dict = {}


def step_midpoint(state: FieldState, dt: float) -> FieldState:
    """One implicit-midpoint step; factorizations are cached per (ops, dt)."""
    key = (id(state.ops), float(dt))
    st = _STEPPERS.get(key)
    if st is None or st.ops is not state.ops:
        if len(_STEPPERS) > 16:
            _STEPPERS.clear()
        st = MidpointStepper(state.ops, dt)
        _STEPPERS[key] = st
    return st.step(state)


def default_dt(ops: OperatorPair, factor: float = 0.2) -> float:
    """factor * h / c with c = sqrt(max Delta / min A) from sampled coefficients."""
    s = ops.slab
    h = min(s.h_r, s.h_x)
    c = math.sqrt(max(np.max(s.Delta_r_faces), np.max(s.Delta_x_faces)) / np.min(s.A))
    return factor * h / c


def threshold_decompose(state0: FieldState):
    """(c0, c1, v_state) with u0 = c0 1 + v0 and u1 = c1 1 + v1, v-parts A-mean zero."""
    if state0.m != 0:
        raise WrongMode("constants are threshold states only for m = 0")
    ops = state0.ops
    c0 = complex(weighted_mean(ops, state0.u))
    c1 = complex(weighted_mean(ops, state0.ut))
    v = FieldState(state0.u - c0, state0.ut - c1, state0.t, ops)
    return c0, c1, v


# ---------------------------------------------------------------------------
# stability constants and experiments


@dataclass(frozen=True)
class StabilityConstants:
    a_minus: float
    a_plus: float
    phi_minus: float
    phi_plus: float
    dr_minus: float
    dr_plus: float
    dx_minus: float
    dx_plus: float
    m_grad: float
    M_grad: float
    C_P: float  # unweighted discrete Poincare constant on the A-mean-zero space
    c_low: float
    C_high: float

    @property
    def C_stab(self) -> float:
        return math.sqrt(self.C_high / self.c_low)


def stability_constants(ops: OperatorPair, lambda1: float) -> StabilityConstants:
    """Energy-equivalence constants from sampled coefficient extrema.

    With the sampled extrema the discrete inequalities
    ``c_low N^2 <= E <= C_high N^2`` hold exactly for A-mean-zero data, where
    ``N^2 = ||v||^2 + ||grad v||^2 + ||v_t||^2`` is the unweighted discrete
    norm (:func:`standard_norm`).  The unweighted Poincare constant is
    ``1 / (a_- lambda_1)``, with ``lambda_1`` from :func:`coercivity_eigenvalue`.
    """
    s = ops.slab
    a_m, a_p = float(np.min(s.A)), float(np.max(s.A))
    ph_m, ph_p = float(np.min(s.Phi)), float(np.max(s.Phi))
    dr_m, dr_p = float(np.min(s.Delta_r_faces)), float(np.max(s.Delta_r_faces))
    dx_m, dx_p = float(np.min(s.Delta_x_faces)), float(np.max(s.Delta_x_faces))
    if ops.m == 0:
        # no phi-derivative in the m = 0 sector, so Phi does not enter
        m_grad, M_grad = min(dr_m, dx_m), max(dr_p, dx_p)
    else:
        m_grad, M_grad = min(ph_m, dr_m, dx_m), max(ph_p, dr_p, dx_p)
    C_P = 1.0 / (a_m * lambda1)
    c_low = min(a_m / 2, 1.0 / (2 * (C_P + 1.0 / m_grad)))
    C_high = 0.5 * max(a_p, M_grad)
    return StabilityConstants(a_m, a_p, ph_m, ph_p, dr_m, dr_p, dx_m, dx_p, m_grad, M_grad, C_P, c_low, C_high)


def _unit_gradient_ops(ops: OperatorPair) -> OperatorPair:
    """Same grid and mode with Delta_r = Delta_x = Phi = A = 1: the unweighted H^1 seminorm."""
    s = ops.slab
    flat = flat_slab(s.n_r, (s.r[0], s.r[-1], s.x[0], s.x[-1]), m=ops.m, n_x=s.n_x)
    return assemble_operators(flat)


def standard_norm(ops: OperatorPair, unit: OperatorPair, v: np.ndarray, vt: np.ndarray) -> float:
    """sqrt(||v||^2 + ||grad v||^2 + ||v_t||^2) with trapezoid weights and unit coefficients."""
    return math.sqrt(abs(unit.inner(v, v)) + unit.quad(v) + abs(unit.inner(vt, vt)))


def weighted_norm(ops: OperatorPair, v: np.ndarray, vt: np.ndarray) -> float:
    """sqrt(v^H M_A v + v^H H v + v_t^H M_A v_t), the coefficient-weighted norm."""
    return math.sqrt(abs(ops.inner(v, v)) + ops.quad(v) + abs(ops.inner(vt, vt)))


@dataclass
class TimeSeries:
    t: np.ndarray
    E: np.ndarray
    mean_u: np.ndarray
    mean_ut: np.ndarray
    norm_u: np.ndarray  # sqrt(u^H M u), the A-weighted L2 norm of the full field
    norm_v: np.ndarray  # sqrt(v^H H v + v^H M v)
    norm_vt: np.ndarray  # sqrt(v_t^H M v_t)
    std_norm: np.ndarray  # standard (unweighted) norm of (v, v_t)
    energy_drift: float
    affine_defect: float  # max |second difference of <M u, 1>|
    sup_ratio_standard: float
    sup_ratio_weighted: float
    C_stab: float
    weighted_bound: float  # sqrt(1 + 1/lambda_1), bound for the weighted norm ratio
    late_energy_ratio: float  # min over last quarter of E(v) / E(v)(0)
    final_state: FieldState = field(repr=False, default=None)

    @property
    def bound_ok(self) -> bool:
        return self.sup_ratio_standard <= self.C_stab * (1 + 1e-12)

    def rows(self):
        for k in range(len(self.t)):
            yield (self.t[k], self.E[k], float(np.real(self.mean_u[k])), float(np.real(self.mean_ut[k])),
                   self.norm_v[k], self.norm_vt[k])


def coercivity_eigenvalue(ops: OperatorPair) -> float:
    """Smallest eigenvalue of H relative to M_A on the space where v lives.

    For m = 0 this is lambda_1 (v is A-mean-zero); for m != 0 the m^2 Phi
    term makes H definite and the lowest eigenvalue itself is used.
    """
    spec = lowest_eigenpairs(ops, 2)
    return float(spec.eigenvalues[1] if ops.m == 0 else spec.eigenvalues[0])


def run_boundedness_experiment(ops: OperatorPair, data, T: float, dt: float | None = None,
                               lambda1: float | None = None, record_every: int = 1) -> TimeSeries:
    """Evolve ``data = (u0, u1)`` to time ``T`` and measure threshold-projected norms.

    For m = 0 the affine threshold part ``(c0 + c1 t) 1`` is removed before
    measuring ``v``; for m != 0 the whole field is ``v``.
    """
    dt = default_dt(ops) if dt is None else float(dt)
    if dt <= 0 or T <= 0:
        raise InputError("T and dt must be positive")
    n_steps = int(math.ceil(T / dt - 1e-12))
    if lambda1 is None:
        lambda1 = coercivity_eigenvalue(ops)
    consts = stability_constants(ops, lambda1)
    unit = _unit_gradient_ops(ops)
    state = init_state(ops, *data)
    stepper = MidpointStepper(ops, dt)
    if ops.m == 0:
        c0, c1, _ = threshold_decompose(state)
    else:
        c0 = c1 = 0.0
    ones = ops.ones
    msum = float(np.sum(ops.mass))

    def measure(st):
        v = st.u - (c0 + c1 * st.t) * ones
        vt = st.ut - c1 * ones
        rep = energy_and_average(st)
        e_v = 0.5 * float(np.real(ops.inner(vt, vt))) + 0.5 * ops.quad(v)
        return (rep.E, rep.mean_u, rep.mean_ut,
                math.sqrt(abs(ops.inner(st.u, st.u))),
                math.sqrt(max(ops.quad(v), 0.0) + abs(ops.inner(v, v))),
                math.sqrt(abs(ops.inner(vt, vt))),
                standard_norm(ops, unit, v, vt), weighted_norm(ops, v, vt), e_v)

    recs = [measure(state)]
    times = [state.t]
    E0 = recs[0][0]
    max_drift = 0.0
    mavg = [np.dot(ops.mass, state.u) / msum]
    affine = 0.0
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        mavg.append(np.dot(ops.mass, state.u) / msum)
        if len(mavg) >= 3:
            affine = max(affine, abs(mavg[-1] - 2 * mavg[-2] + mavg[-3]))
            mavg.pop(0)
        if k % record_every == 0 or k == n_steps:
            rec = measure(state)
            recs.append(rec)
            times.append(state.t)
            if E0:
                max_drift = max(max_drift, abs(rec[0] - E0) / abs(E0))
            else:
                max_drift = max(max_drift, abs(rec[0]))
    arr = list(zip(*recs))
    std = np.asarray(arr[6])
    wn = np.asarray(arr[7])
    ev = np.asarray(arr[8])
    late = ev[len(ev) * 3 // 4:]
    return TimeSeries(
        t=np.asarray(times), E=np.asarray(arr[0]), mean_u=np.asarray(arr[1]), mean_ut=np.asarray(arr[2]),
        norm_u=np.asarray(arr[3]), norm_v=np.asarray(arr[4]), norm_vt=np.asarray(arr[5]), std_norm=std,
        energy_drift=max_drift, affine_defect=float(affine) if ops.m == 0 else float("nan"),
        sup_ratio_standard=float(np.max(std) / std[0]) if std[0] else 0.0,
        sup_ratio_weighted=float(np.max(wn) / wn[0]) if wn[0] else 0.0,
        C_stab=consts.C_stab, weighted_bound=math.sqrt(1 + 1 / lambda1),
        late_energy_ratio=float(np.min(late) / ev[0]) if ev[0] else float("nan"),
        final_state=state,
    )
