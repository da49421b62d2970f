"""Extremal-horizon laboratory on the collar [M, M + delta_c] x [0, pi].

Works in ingoing coordinates (v, r, theta) on an extremal background
(a^2 + Q^2 = M^2, Delta = (r - M)^2) for axisymmetric solutions of

    Delta u_rr + Delta' u_r + 2 (r^2 + a^2) u_rv + 2 r u_v + a^2 sin^2(theta) u_vv + L u = 0,

with L the axisymmetric angular Laplacian.  The horizon charge is

    A0 = int_0^pi (2 (M^2 + a^2) u_r + 2 M u + a^2 sin^2(theta) u_v)(v, M, theta) sin(theta) dtheta.

Angular variable mu = cos(theta) on Gauss-Legendre nodes, so the axis is
never sampled and L acts diagonally on Legendre modes.

For a = 0 the equation is first order in v for W = 2 r^2 u_r + 2 r u:

    W_v = -(Delta u_r)_r - L u,     (r u)_r = W / (2 r),

and u is recovered by inward integration from the outer collar boundary,
where the trace of u is frozen at its initial value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .errors import (DomainOfDependenceExceeded, InputError, InsufficientHistory, NotExtremal,
                     StepFailure)
from .legendre import legendre_p

EXTREMAL_RTOL = 1e-12


@dataclass
class ExtremalState:
    M: float
    a: float
    Q: float
    r: np.ndarray  # (n_r + 1,) from M to M + delta_c
    mu: np.ndarray  # Gauss-Legendre nodes in cos(theta)
    weights: np.ndarray
    u: np.ndarray  # (n_r + 1, n_theta)
    p: Optional[np.ndarray]  # u_v, evolved by the a != 0 scheme
    v: float = 0.0
    W: Optional[np.ndarray] = None  # 2 r^2 u_r + 2 r u, evolved by the a = 0 scheme
    trace: Optional[np.ndarray] = None  # frozen outer trace of u
    window: float = math.inf  # domain-of-dependence limit on v
    history: list = field(default_factory=list)  # (v, u, u_r, p) at r = M, most recent last

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def sin2(self) -> np.ndarray:
        return 1.0 - self.mu**2


def _check_extremal(M, a, Q):
    if M <= 0:
        raise InputError("M must be positive")
    if abs(a * a + Q * Q - M * M) > EXTREMAL_RTOL * M * M:
        raise NotExtremal(f"a^2 + Q^2 = {a * a + Q * Q} differs from M^2 = {M * M}")


def angular_laplacian(mu: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Matrix of the axisymmetric angular Laplacian on Gauss-Legendre nodes.

    Exact on Legendre polynomials of degree below the node count:
    L P_l = -l (l + 1) P_l.
    """
    n = len(mu)
    V = legendre_p(n - 1, mu).T  # V[j, l] = P_l(mu_j)
    ell = np.arange(n)
    Vinv = ((2 * ell + 1) / 2)[:, None] * V.T * weights[None, :]
    return V @ np.diag(-ell * (ell + 1.0)) @ Vinv


def delta_extremal(r, M):
    return (r - M) ** 2


def dependence_window(M: float, a: float, r_support: float, R: float) -> float:
    """Advanced time for an outgoing ray to travel from ``r_support`` to ``R``.

    Outgoing rays satisfy dr/dv = Delta / (2 (r^2 + a^2)); data supported in
    [M, r_support] does not reach the outer boundary before this time, so the
    frozen outer trace stays exact on that window.
    """
    if r_support >= R:
        return 0.0
    if r_support <= M:
        return math.inf
    val, _ = quad(lambda r: 2 * (r * r + a * a) / delta_extremal(r, M), r_support, R, epsabs=0, epsrel=1e-12)
    return float(val)


def make_state(M: float, a: float, Q: float, u0, p0=None, n_r: int = 64, n_theta: int = 8,
               collar: Optional[float] = None, window="auto") -> ExtremalState:
    """Sample initial data on the collar.

    ``u0`` and ``p0`` are callables ``f(r, mu)`` (broadcasting) or arrays of
    shape (n_r + 1, n_theta).  ``window='auto'`` sets the domain-of-dependence
    limit from the outermost radius where u0 differs from its outer trace; a
    float sets it explicitly and ``None`` disables it.
    """
    _check_extremal(M, a, Q)
    delta_c = 0.5 * M if collar is None else float(collar)
    if delta_c <= 0:
        raise InputError("collar width must be positive")
    r = M + np.linspace(0.0, delta_c, n_r + 1)
    mu, w = leggauss(n_theta)
    R, MU = np.meshgrid(r, mu, indexing="ij")

    def sample(f):
        if f is None:
            return np.zeros_like(R)
        if callable(f):
            return np.broadcast_to(np.asarray(f(R, MU), dtype=float), R.shape).copy()
        arr = np.asarray(f, dtype=float)
        if arr.shape != R.shape:
            raise InputError(f"data shape {arr.shape} does not match the grid {R.shape}")
        return arr.copy()

    u = sample(u0)
    p = sample(p0)
    trace = u[-1].copy()
    if window == "auto":
        dev = np.max(np.abs(u - trace[None, :]), axis=1)
        scale = max(np.max(np.abs(u)), 1e-300)
        nz = np.nonzero(dev > 1e-14 * scale)[0]
        win = math.inf if len(nz) == 0 else dependence_window(M, a, float(r[nz[-1]]), float(r[-1]))
    elif window is None:
        win = math.inf
    else:
        win = float(window)
    st = ExtremalState(float(M), float(a), float(Q), r, mu, w, u, p, 0.0, None, trace, win)
    if a == 0:
        st.W = 2 * R * R * _dr(u, st.h) + 2 * R * u
        # make (W, u) consistent with the recovery map so v = 0 is already on the scheme
        st.u = _recover_u(st.W, r, trace)
        u = st.u
    _keep_history(st)
    return st


def _dr(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative along axis 0, one-sided at both ends."""
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return d


def _dr_flux(f: np.ndarray, h: float) -> np.ndarray:
    """First derivative with central interior and third-order one-sided closures.

    The closure at r = M sets the truncation order of the charge drift, since
    the flux Delta u_r vanishes to second order there.
    """
    d = np.empty_like(f)
    d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    d[0] = (-11 * f[0] + 18 * f[1] - 9 * f[2] + 2 * f[3]) / (6 * h)
    d[-1] = (11 * f[-1] - 18 * f[-2] + 9 * f[-3] - 2 * f[-4]) / (6 * h)
    return d


def _dr_matrix(n: int, h: float) -> sparse.csr_matrix:
    D = sparse.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -1 / (2 * h), 1 / (2 * h)
    D[0, 0:3] = np.array([-3, 4, -1]) / (2 * h)
    D[n - 1, n - 3:n] = np.array([1, -4, 3]) / (2 * h)
    return D.tocsr()


def horizon_dr_u(state: ExtremalState, u=None, p=None) -> np.ndarray:
    """u_r at r = M (v-chart derivative) on the angular nodes."""
    if u is None and state.W is not None:
        M = state.M
        return state.W[0] / (2 * M * M) - state.u[0] / M
    u = state.u if u is None else u
    p = state.p if p is None else p
    ur = _dr(u, state.h)[0]
    if state.a != 0 and p is not None:
        ur = ur - kn_tilt(state.M, state.a) * p[0]
    return ur


def extremal_charge(state: ExtremalState, form: str = "axisymmetric") -> float:
    """Horizon charge by Gauss-Legendre quadrature on the slice r = M.

    ``form='axisymmetric'`` integrates against sin(theta) dtheta over [0, pi];
    ``form='sphere'`` integrates over the full sphere (extra factor 2 pi), the
    natural normalization on extremal Reissner-Nordstrom.
    """
    _check_extremal(state.M, state.a, state.Q)
    M, a = state.M, state.a
    integrand = 2 * (M * M + a * a) * horizon_dr_u(state) + 2 * M * state.u[0]
    if a != 0 and state.p is not None:
        integrand = integrand + a * a * state.sin2 * state.p[0]
    val = float(np.dot(state.weights, integrand))
    if form == "axisymmetric":
        return val
    if form == "sphere":
        return 2 * math.pi * val
    raise InputError("form must be 'axisymmetric' or 'sphere'")


@dataclass(frozen=True)
class ChargeSeries:
    v: np.ndarray
    charge: np.ndarray
    mean_dr_u: np.ndarray  # (1/2) int u_r sin(theta) dtheta at r = M
    mean_u: np.ndarray  # (1/2) int u sin(theta) dtheta at r = M
    mean_p: np.ndarray

    @property
    def drift(self) -> float:
        return float(np.max(np.abs(self.charge - self.charge[0])))

    def rows(self):
        for row in zip(self.v, self.charge, self.mean_dr_u, self.mean_u, self.mean_p):
            yield tuple(float(x) for x in row)


def _sample(state: ExtremalState):
    w = state.weights
    p0 = state.p[0] if state.p is not None else np.zeros_like(state.mu)
    return (state.v, extremal_charge(state), 0.5 * float(np.dot(w, horizon_dr_u(state))),
            0.5 * float(np.dot(w, state.u[0])), 0.5 * float(np.dot(w, p0)))


def _series(samples) -> ChargeSeries:
    arr = np.array(samples, dtype=float)
    return ChargeSeries(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])


def _check_window(state: ExtremalState, dv: float, n_steps: int):
    if dv <= 0 or n_steps < 0:
        raise InputError("dv must be positive and n_steps nonnegative")
    v_end = state.v + dv * n_steps
    if v_end > state.window * (1 + 1e-12):
        raise DomainOfDependenceExceeded(
            f"requested v = {v_end:.6g} beyond the domain-of-dependence window {state.window:.6g}")


def _keep_history(state: ExtremalState, depth: int = 3):
    p0 = np.zeros_like(state.mu) if state.p is None else state.p[0].copy()
    state.history.append((state.v, state.u[0].copy(), horizon_dr_u(state).copy(), p0))
    del state.history[:-depth]


# ---------------------------------------------------------------------------
# a = 0: characteristic scheme


def _recover_u(W: np.ndarray, r: np.ndarray, trace: np.ndarray) -> np.ndarray:
    """Solve (r u)_r = W / (2 r) inward from the frozen trace (trapezoid rule)."""
    f = W / (2 * r[:, None])
    h = r[1] - r[0]
    seg = 0.5 * h * (f[1:] + f[:-1])
    tail = np.concatenate([np.cumsum(seg[::-1], axis=0)[::-1], np.zeros((1, W.shape[1]))])
    ru = r[-1] * trace[None, :] - tail
    return ru / r[:, None]


def _rn_rhs(W, r, M, trace, Lt, h):
    u = _recover_u(W, r, trace)
    ur = W / (2 * r[:, None] ** 2) - u / r[:, None]
    flux = delta_extremal(r, M)[:, None] * ur
    return -_dr_flux(flux, h) - u @ Lt, u


def evolve_extremal_rn(state: ExtremalState, dv: float, n_steps: int,
                       record_every: int = 1) -> tuple[ExtremalState, ChargeSeries]:
    """Classical RK4 in v for W on extremal Reissner-Nordstrom (a = 0, Q^2 = M^2)."""
    if state.a != 0:
        raise InputError("evolve_extremal_rn requires a = 0")
    _check_extremal(state.M, state.a, state.Q)
    _check_window(state, dv, n_steps)
    st = replace(state, u=state.u.copy(), W=state.W.copy(), history=list(state.history))
    Lt = angular_laplacian(st.mu, st.weights).T
    r, M, h, tr = st.r, st.M, st.h, st.trace
    samples = [_sample(st)]
    for n in range(n_steps):
        W = st.W
        k1, _ = _rn_rhs(W, r, M, tr, Lt, h)
        k2, _ = _rn_rhs(W + 0.5 * dv * k1, r, M, tr, Lt, h)
        k3, _ = _rn_rhs(W + 0.5 * dv * k2, r, M, tr, Lt, h)
        k4, _ = _rn_rhs(W + dv * k3, r, M, tr, Lt, h)
        W_new = W + dv / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(W_new)):
            raise StepFailure(f"non-finite state at step {n}")
        st.W = W_new
        u_new = _recover_u(W_new, r, tr)
        st.p = (u_new - st.u) / dv  # diagnostic only; u_v is not a state variable here
        st.u = u_new
        st.v = state.v + (n + 1) * dv
        _keep_history(st)
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            samples.append(_sample(st))
    return st, _series(samples)


# ---------------------------------------------------------------------------
# a != 0: Crank-Nicolson on (u, p = u_v)  (experimental)


def kn_tilt(r, a):
    """c(r) = a^2 / (r^2 + a^2), the slope of the slicing tau = v - a arctan(r / a)."""
    return a * a / (r * r + a * a)


def _radial_flux_matrix(r: np.ndarray, M: float, h: float) -> sparse.csr_matrix:
    """(Delta U_r)_r: conservative three-point interior, one-sided closures at the ends."""
    n = len(r)
    Dh = delta_extremal(0.5 * (r[1:] + r[:-1]), M)
    A = sparse.lil_matrix((n, n))
    for i in range(1, n - 1):
        A[i, i - 1] = Dh[i - 1] / h**2
        A[i, i + 1] = Dh[i] / h**2
        A[i, i] = -(Dh[i - 1] + Dh[i]) / h**2
    D = _dr_matrix(n, h)
    nested = (D @ sparse.diags(delta_extremal(r, M)) @ D).tolil()
    A[0, :] = nested[0, :]
    A[n - 1, :] = nested[n - 1, :]
    return A.tocsr()


def _kn_system(state: ExtremalState, dt: float):
    """Crank-Nicolson matrices for alpha U_tt = beta U_rt + gamma U_t + (Delta U_r)_r + L U."""
    n = len(state.r)
    m = len(state.mu)
    M, a = state.M, state.a
    r = state.r
    Dl = delta_extremal(r, M)
    c = kn_tilt(r, a)
    dc = -2 * a * a * r / (r * r + a * a) ** 2
    beta = 2 * (r * r + a * a) - 2 * Dl * c
    gamma = 2 * r - Dl * dc - 2 * (r - M) * c
    # alpha = a^2 (1 + mu^2) - Delta c^2 > 0 on the collar
    alpha = a * a * (1 + state.mu[None, :] ** 2) - (Dl * c * c)[:, None]
    if np.any(alpha <= 0):
        raise InputError("collar too wide for the tilted slicing (alpha <= 0)")
    D = _dr_matrix(n, state.h)
    It = sparse.identity(m)
    L = sparse.csr_matrix(angular_laplacian(state.mu, state.weights))
    Ir = sparse.identity(n)
    Kuu = sparse.kron(_radial_flux_matrix(r, M, state.h), It) + sparse.kron(Ir, L)
    Kup = sparse.kron(sparse.diags(beta) @ D + sparse.diags(gamma), It)
    N = n * m
    K = sparse.bmat([[None, sparse.identity(N)], [Kuu, Kup]]).tocsr()
    B = sparse.block_diag([sparse.identity(N), sparse.diags(alpha.ravel())]).tocsr()
    lhs = (B - 0.5 * dt * K).tolil()
    rhs = (B + 0.5 * dt * K).tocsr()
    # outer boundary rows: u frozen, p = 0
    fixed = [(n - 1) * m + j for j in range(m)] + [N + (n - 1) * m + j for j in range(m)]
    for row in fixed:
        lhs.rows[row] = [row]
        lhs.data[row] = [1.0]
    return splu(lhs.tocsc()), rhs, fixed


def evolve_extremal_kn(state: ExtremalState, dv: float, n_steps: int,
                       record_every: int = 1) -> tuple[ExtremalState, ChargeSeries]:
    """EXPERIMENTAL: Crank-Nicolson method of lines for a != 0 on (u, p = u_v).

    For a != 0 the slices v = const are timelike away from the axis
    (g^{vv} = a^2 sin^2(theta) / rho^2 > 0), so marching in v is ill posed.
    The scheme marches instead in tau = v - a arctan(r / a), whose slices are
    spacelike on the collar; at fixed r, d/dtau = d/dv, and the v-chart
    radial derivative is u_r|_v = u_r|_tau - c(r) p.  The state u is read in
    the tau chart, so initial data are posed on tau = 0.  The mixed r-tau
    term is implicit.  ``dv`` is the step in tau (equal to the step in v at
    fixed r).  Only constant solutions, the v = 0 charge and short-window
    refinement are supported claims.
    """
    if state.a == 0:
        raise InputError("evolve_extremal_kn requires a != 0; use evolve_extremal_rn")
    _check_extremal(state.M, state.a, state.Q)
    _check_window(state, dv, n_steps)
    st = replace(state, u=state.u.copy(), p=state.p.copy(), history=list(state.history))
    lu, rhs, fixed = _kn_system(st, dv)
    shape = st.u.shape
    z = np.concatenate([st.u.ravel(), st.p.ravel()])
    samples = [_sample(st)]
    bvals = z[fixed].copy()
    bvals[len(fixed) // 2:] = 0.0
    bvals[: len(fixed) // 2] = st.trace
    for n in range(n_steps):
        b = rhs @ z
        b[fixed] = bvals
        z = lu.solve(b)
        if not np.all(np.isfinite(z)):
            raise StepFailure(f"non-finite state at step {n}")
        st.u = z[: z.size // 2].reshape(shape)
        st.p = z[z.size // 2:].reshape(shape)
        st.v = state.v + (n + 1) * dv
        _keep_history(st)
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            samples.append(_sample(st))
    return st, _series(samples)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class HorizonResidual:
    pointwise_max: float
    integrated: float  # int residual sin(theta) dtheta = d A0 / dv (discrete)
    pole_term: float  # int L u sin(theta) dtheta


def horizon_equation_residual(state: ExtremalState) -> HorizonResidual:
    """Residual of the horizon-restricted equation at r = M from the v-history.

    v-derivatives use second-order backward differences over the last three
    snapshots, so three equally spaced snapshots are required.
    """
    if len(state.history) < 3:
        raise InsufficientHistory("need three snapshots of v-history")
    (v0, u0, r0, p0), (v1, u1, r1, p1), (v2, u2, r2, p2) = state.history[-3:]
    dv = v2 - v1
    if dv <= 0 or abs((v1 - v0) - dv) > 1e-9 * dv:
        raise InsufficientHistory("history snapshots are not equally spaced")
    M, a = state.M, state.a
    dvu = (3 * u2 - 4 * u1 + u0) / (2 * dv)
    dvur = (3 * r2 - 4 * r1 + r0) / (2 * dv)
    dvvu = (3 * p2 - 4 * p1 + p0) / (2 * dv)
    Lu = angular_laplacian(state.mu, state.weights) @ u2
    res = 2 * (M * M + a * a) * dvur + 2 * M * dvu + a * a * state.sin2 * dvvu + Lu
    w = state.weights
    return HorizonResidual(float(np.max(np.abs(res))), float(np.dot(w, res)), float(np.dot(w, Lu)))


@dataclass(frozen=True)
class ObstructionVerdict:
    charge: float
    target: float  # A0 / (4 (M^2 + a^2)): limit of the averaged u_r once u, u_v decay
    late_mean_dr_u: float
    tangential_decaying: bool
    flag: bool


def obstruction_verdict(series: ChargeSeries, M: float, a: float, late_fraction: float = 0.25,
                        charge_floor: float = 1e-12) -> ObstructionVerdict:
    """Non-decay flag for the averaged transversal derivative.

    Tangential averages count as decaying when their late-window maximum is
    at most half of their maximum over the run.  The flag is raised when the
    charge is nonzero, the tangential averages decay, and the late-window
    averaged u_r stays at least half of the limiting value in magnitude.
    """
    n = len(series.v)
    k = max(1, int(math.ceil(late_fraction * n)))
    A0 = float(series.charge[0])
    target = A0 / (4 * (M * M + a * a))
    tang = np.abs(series.mean_u) + a * a * np.abs(series.mean_p)
    peak = float(np.max(tang))
    late = float(np.max(tang[-k:]))
    decaying = peak == 0.0 or late <= 0.5 * peak
    late_dr = float(np.mean(series.mean_dr_u[-k:]))
    flag = abs(A0) > charge_floor and decaying and float(np.min(np.abs(series.mean_dr_u[-k:]))) >= 0.5 * abs(target)
    return ObstructionVerdict(A0, target, late_dr, bool(decaying), bool(flag))


def quadrature_exactness(n_theta: int) -> float:
    """Max error of int P_l(mu) dmu over l < 2 n_theta on the Gauss nodes (exact: 2 delta_l0)."""
    mu, w = leggauss(n_theta)
    P = legendre_p(2 * n_theta - 1, mu)
    exact = np.zeros(2 * n_theta)
    exact[0] = 2.0
    return float(np.max(np.abs(P @ w - exact)))
