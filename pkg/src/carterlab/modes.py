"""Separated radial and angular ODEs: Frobenius endpoint data, Wronskian-monitored
radial integration, angular eigenvalues by Pruefer shooting, and the
zero-frequency branch classification.

Radial equation (with K = (r^2 + a^2) Omega - a m):

    (Delta_r R')' + [K^2 / Delta_r + k r^2 / 3 - lambda] R = 0.

Angular equation (with N = a (1 - x^2) Omega - m):

    (Delta_x S')' + [-N^2 / Delta_x + k a^2 x^2 / 3 + lambda] S = 0.

The angular variable is x = cos(theta); the regular branch at a simple zero
of Delta_x is the one that is smooth in the endpoint chart, i.e. the Frobenius
branch with the larger real exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import BracketFailure, InputError, NotSimpleZero, ParameterDomain, StepFailure
from .legendre import derivative_from_recurrence, legendre_p, legendre_q, q_derivative
from .metric import CoefficientSet, build_coefficients, kn_embed, to_float


@dataclass(frozen=True)
class ModeParams:
    Omega: complex
    m: int
    lam: complex
    background: CoefficientSet


def _float_bg(bg: CoefficientSet) -> CoefficientSet:
    return CoefficientSet(to_float(bg.params)) if bg.params.exact else bg


def _poly_coeffs(kind: str, bg: CoefficientSet):
    """Ascending coefficients of Delta_r (in r) or Delta_x (in x)."""
    p = to_float(bg.params) if bg.params.exact else bg.params
    if kind == "radial":
        return np.array([p.alpha0, p.alpha1, p.alpha2, 0.0, p.alpha4], dtype=float)
    return np.array([p.beta0, p.beta1, p.beta2, 0.0, p.beta4], dtype=float)


def _shift_poly(c: np.ndarray, x0: float, direction: int) -> np.ndarray:
    """Coefficients in xi of p(x0 + direction * xi)."""
    out = np.zeros(len(c), dtype=complex)
    base = np.array([x0, direction], dtype=complex)
    power = np.array([1.0 + 0j])
    for ck in c:
        out[: len(power)] += ck * power
        power = npoly.polymul(power, base)
    return np.trim_zeros(out, "b") if np.any(out) else np.zeros(1, dtype=complex)


# ---------------------------------------------------------------------------
# Frobenius


@dataclass(frozen=True)
class FrobeniusData:
    kind: str  # "radial" or "angular"
    endpoint: float
    direction: int  # +1: xi = var - endpoint, -1: xi = endpoint - var
    kappa: float  # Delta'(endpoint) in the original variable
    exponents: tuple  # (s_plus, s_minus) as in the closed forms
    branch_exponent: complex  # exponent of the series below
    coefficients: np.ndarray  # c_0 = 1, c_1, ... of the branch
    log_branch: bool  # exponents differ by an integer: the other branch may carry a log
    A: np.ndarray = field(repr=False, default=None)
    B: np.ndarray = field(repr=False, default=None)
    C: np.ndarray = field(repr=False, default=None)

    def evaluate(self, var: float):
        """(value, d/dvar) of xi^s sum c_n xi^n at a point of the original variable."""
        xi = self.direction * (var - self.endpoint)
        if xi <= 0:
            raise InputError("point is not on the integration side of the endpoint")
        s = self.branch_exponent
        n = np.arange(len(self.coefficients))
        pw = xi ** n
        series = np.dot(self.coefficients, pw)
        dseries = np.dot(self.coefficients[1:] * n[1:], pw[:-1] / 1.0) if len(n) > 1 else 0.0
        val = xi**s * series
        dval = (s * xi ** (s - 1) * series + xi**s * dseries) * self.direction
        return complex(val), complex(dval)

    def residual(self, xi: float) -> complex:
        """Residual of xi^2 A f'' + xi B f' + C f for the truncated series at xi."""
        s = self.branch_exponent
        c = self.coefficients
        n = np.arange(len(c))
        f = np.sum(c * xi ** (n + s))
        fp = np.sum(c * (n + s) * xi ** (n + s - 1))
        fpp = np.sum(c * (n + s) * (n + s - 1) * xi ** (n + s - 2))
        A = npoly.polyval(xi, self.A)
        B = npoly.polyval(xi, self.B)
        C = npoly.polyval(xi, self.C)
        return complex(xi * xi * A * fpp + xi * B * fp + C * f)


def _frobenius_polys(kind: str, bg: CoefficientSet, endpoint: float, direction: int, Omega, m, lam):
    """Polynomials A, B, C in xi with xi^2 A f'' + xi B f' + C f = 0 (f as function of xi)."""
    bgf = _float_bg(bg)
    a = float(bgf.params.a)
    k = float(bgf.params.k)
    D = _shift_poly(_poly_coeffs(kind, bgf), endpoint, direction)
    if abs(D[0]) > 1e-12 * max(1.0, np.max(np.abs(D))):
        raise NotSimpleZero(f"Delta does not vanish at {endpoint}")
    q = D[1:] if len(D) > 1 else np.zeros(1, dtype=complex)
    if abs(q[0]) <= 1e-12 * max(1.0, np.max(np.abs(q))):
        raise NotSimpleZero(f"Delta has a multiple zero at {endpoint}; use the extremal branch")
    var = np.array([endpoint, direction], dtype=complex)  # original variable as polynomial in xi
    var2 = npoly.polymul(var, var)
    if kind == "radial":
        K = npoly.polyadd(npoly.polymul(npoly.polyadd(var2, [a * a]), [Omega]), [-a * m])
        pot = npoly.polyadd(npoly.polymul(var2, [k / 3]), [-lam])
        C = npoly.polyadd(npoly.polymul(K, K), npoly.polymul(npoly.polymul(pot, [0, 1]), q))
    else:
        N = npoly.polyadd(npoly.polymul(npoly.polysub([1.0], var2), [a * Omega]), [-m])
        pot = npoly.polyadd(npoly.polymul(var2, [k * a * a / 3]), [lam])
        C = npoly.polyadd(-npoly.polymul(N, N), npoly.polymul(npoly.polymul(pot, [0, 1]), q))
    A = npoly.polymul(q, q)
    dq = npoly.polyder(q) if len(q) > 1 else np.zeros(1)
    B = npoly.polymul(q, npoly.polyadd(q, npoly.polymul([0, 1], dq)))
    return np.asarray(A, complex), np.asarray(B, complex), np.asarray(C, complex), q


def _series(A, B, C, s, order):
    def coef(p, i):
        return p[i] if i < len(p) else 0.0

    c = np.zeros(order + 1, dtype=complex)
    c[0] = 1.0
    for N in range(1, order + 1):
        FN = (N + s) * (N + s - 1) * coef(A, 0) + (N + s) * coef(B, 0) + coef(C, 0)
        acc = 0.0
        for n in range(N):
            j = N - n
            acc += c[n] * ((n + s) * (n + s - 1) * coef(A, j) + (n + s) * coef(B, j) + coef(C, j))
        if abs(FN) < 1e-300:
            raise NotSimpleZero("resonant Frobenius recursion for this branch")
        c[N] = -acc / FN
    return c


def frobenius_data(bg: CoefficientSet, endpoint: float, Omega, m: int, order: int = 12,
                   kind: str = "radial", lam=0.0, direction: int = 1, branch: str = "regular") -> FrobeniusData:
    """Indicial exponents and a Frobenius series at a simple zero of Delta.

    Radial exponents are ``+-i sigma_h``, ``sigma_h = ((r_h^2 + a^2) Omega - a m) / kappa_h``;
    angular exponents are ``+-nu / kappa`` with ``nu = a (1 - x*^2) Omega - m``.
    ``branch`` is ``'regular'`` (larger real part; ties go to ``s_plus``),
    ``'plus'`` or ``'minus'``.  Raises :class:`NotSimpleZero` at a double root.
    """
    if kind not in ("radial", "angular"):
        raise InputError("kind must be 'radial' or 'angular'")
    bgf = _float_bg(bg)
    a = float(bgf.params.a)
    A, B, C, q = _frobenius_polys(kind, bgf, endpoint, direction, Omega, m, lam)
    kappa = float(np.real(q[0])) * direction
    if kind == "radial":
        sig = ((endpoint**2 + a * a) * Omega - a * m) / kappa
        s_plus, s_minus = 1j * sig, -1j * sig
    else:
        nu = a * (1 - endpoint**2) * Omega - m
        s_plus, s_minus = nu / kappa + 0j, -nu / kappa + 0j
    if branch == "regular":
        s = s_plus if np.real(s_plus) >= np.real(s_minus) else s_minus
    elif branch == "plus":
        s = s_plus
    elif branch == "minus":
        s = s_minus
    else:
        raise InputError("branch must be 'regular', 'plus' or 'minus'")
    diff = s_plus - s_minus
    log_branch = abs(diff.imag) < 1e-14 and abs(diff.real - round(diff.real)) < 1e-14
    coeffs = _series(A, B, C, s, order)
    return FrobeniusData(kind, float(endpoint), int(direction), kappa, (complex(s_plus), complex(s_minus)),
                         complex(s), coeffs, bool(log_branch), A, B, C)


# ---------------------------------------------------------------------------
# radial integration


@dataclass(frozen=True)
class RadialTrajectory:
    r: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    W: np.ndarray  # Delta_r (conj(R) R' - conj(R') R)
    W_drift: float
    dense: Callable = field(repr=False, default=None)  # r -> (R, P) with P = Delta_r R'


def _radial_rhs(params: ModeParams):
    bg = _float_bg(params.background)
    a = float(bg.params.a)
    k = float(bg.params.k)
    Om, m, lam = params.Omega, params.m, params.lam

    def rhs(r, y):
        d = bg.delta_r(r)
        K = (r * r + a * a) * Om - a * m
        return [y[1] / d, -(K * K / d + k * r * r / 3 - lam) * y[0]]

    return rhs, bg


def integrate_radial(params: ModeParams, r_span: Sequence[float], R0, dR0, tol: float = 1e-12,
                     n_samples: int = 201) -> RadialTrajectory:
    """Integrate the radial ODE in the first-order form R' = P / Delta_r, P' = -(...) R.

    ``R0, dR0`` are R and dR/dr at ``r_span[0]``.  Raises :class:`StepFailure`
    if Delta_r vanishes on the closed span (start from a Frobenius series at an
    offset instead) or if the integrator fails.
    """
    rhs, bg = _radial_rhs(params)
    r0, r1 = map(float, r_span)
    probe = np.linspace(r0, r1, 257)
    dvals = bg.delta_r(probe)
    if np.any(dvals <= 0):
        raise StepFailure("Delta_r is not positive on the span; launch from a Frobenius series offset")
    y0 = np.array([complex(R0), complex(dR0) * bg.delta_r(r0)])
    sol = solve_ivp(rhs, (r0, r1), y0, method="DOP853", rtol=tol, atol=tol * 1e-3, dense_output=True)
    if not sol.success:
        raise StepFailure(sol.message)
    rs = np.linspace(r0, r1, n_samples)
    Y = sol.sol(rs)
    R, P = Y[0], Y[1]
    W = np.conj(R) * P - np.conj(P) * R
    drift = float(np.max(np.abs(W - W[0])))
    return RadialTrajectory(rs, R, P / bg.delta_r(rs), W, drift, sol.sol)


def radial_from_endpoint(params: ModeParams, r_h: float, r_end: float, tol: float = 1e-12,
                         branch: str = "plus", order: int = 16) -> tuple[RadialTrajectory, FrobeniusData]:
    """Launch from a Frobenius branch at a simple zero r_h, offset 10 tol^(1/2), and integrate."""
    direction = 1 if r_end > r_h else -1
    fd = frobenius_data(params.background, r_h, params.Omega, params.m, order, "radial", params.lam,
                        direction, branch)
    r0 = r_h + direction * 10 * math.sqrt(tol)
    R0, dR0 = fd.evaluate(r0)
    return integrate_radial(params, (r0, r_end), R0, dR0, tol), fd


def two_solution_wronskian(params: ModeParams, r_span, data1, data2, tol: float = 1e-12) -> np.ndarray:
    """Delta_r (R1 R2' - R1' R2) sampled along the span for two initial data pairs."""
    t1 = integrate_radial(params, r_span, *data1, tol=tol)
    t2 = integrate_radial(params, r_span, *data2, tol=tol)
    bg = _float_bg(params.background)
    d = bg.delta_r(t1.r)
    return d * (t1.R * t2.dR - t1.dR * t2.R)


# ---------------------------------------------------------------------------
# angular eigenvalues


def _angular_coeffs(bg: CoefficientSet, Omega: float, m: int):
    bgf = _float_bg(bg)
    a = float(bgf.params.a)
    k = float(bgf.params.k)

    def V(x):
        N = a * (1 - x * x) * Omega - m
        return N * N / bgf.delta_x(x) - k * a * a * x * x / 3

    return bgf.delta_x, V


def _is_zero_of_delta(bg: CoefficientSet, x: float) -> bool:
    bgf = _float_bg(bg)
    return abs(bgf.delta_x(x)) <= 1e-13


def _prufer_start(bg, Omega, m, lam, endpoint, direction, bc, tol):
    """(x_start, theta_start) for the Pruefer phase leaving an endpoint."""
    p, _ = _angular_coeffs(bg, Omega, m)
    if bc == "dirichlet":
        return endpoint, (0.0 if direction > 0 else math.pi)
    if bc == "neumann":
        return endpoint, math.pi / 2
    if bc == "regular":
        fd = frobenius_data(bg, endpoint, Omega, m, 16, "angular", lam, direction)
        x0 = endpoint + direction * 10 * math.sqrt(tol)
        S, dS = fd.evaluate(x0)
        S, dS = S.real, dS.real
        th = math.atan2(S, p(x0) * dS)
        # left endpoint: phase in [0, pi); right endpoint: phase in (0, pi]
        if direction > 0:
            th = th % math.pi
        else:
            th = th % math.pi
            if th == 0.0:
                th = math.pi
        return x0, th
    raise InputError("bc must be 'neumann', 'dirichlet' or 'regular'")


def _prufer_phase(bg, Omega, m, lam, x_start, th0, x_end, tol):
    p, V = _angular_coeffs(bg, Omega, m)

    def rhs(x, th):
        c, s = math.cos(th[0]), math.sin(th[0])
        return [c * c / p(x) + (lam - V(x)) * s * s]

    sol = solve_ivp(rhs, (x_start, x_end), [th0], method="DOP853", rtol=tol, atol=tol)
    if not sol.success:
        raise StepFailure(sol.message)
    return float(sol.y[0, -1])


def _mismatch(bg, Omega, m, interval, bc, lam, tol, mid):
    xl, xr = interval
    bl, br = bc
    x0, t0 = _prufer_start(bg, Omega, m, lam, xl, +1, bl, tol)
    x1, t1 = _prufer_start(bg, Omega, m, lam, xr, -1, br, tol)
    thl = _prufer_phase(bg, Omega, m, lam, x0, t0, mid, tol)
    thr = _prufer_phase(bg, Omega, m, lam, x1, t1, mid, tol)
    return thl - thr


def angular_eigenvalues(bg: CoefficientSet, Omega: float, m: int, interval: Sequence[float],
                        bc="regular", count: int = 4, tol: float = 1e-12) -> list:
    """First ``count`` eigenvalues of -(Delta_x S')' + V S = lambda S by Pruefer shooting.

    ``bc`` is one of ``'neumann'``, ``'dirichlet'``, ``'regular'`` or a pair
    (left, right).  ``'regular'`` requires a simple zero of Delta_x at that
    endpoint and selects the chart-smooth Frobenius branch.  The j-th
    eigenvalue solves ``theta_L(c) - theta_R(c) = j pi`` at the midpoint ``c``.
    """
    if isinstance(bc, str):
        bc = (bc, bc)
    bc = tuple(b.lower() for b in bc)
    xl, xr = map(float, interval)
    if not xl < xr:
        raise InputError("interval must be increasing")
    p, V = _angular_coeffs(bg, float(Omega), m)
    inner = np.linspace(xl, xr, 203)[1:-1]
    if np.any(p(inner) <= 0):
        raise InputError("Delta_x must be positive on the interval interior")
    for x_e, b in zip((xl, xr), bc):
        if b == "regular" and not _is_zero_of_delta(bg, x_e):
            raise InputError(f"'regular' endpoint condition needs Delta_x({x_e}) = 0")
        if b != "regular" and _is_zero_of_delta(bg, x_e):
            raise InputError(f"Delta_x vanishes at {x_e}; use the 'regular' endpoint condition")
    mid = 0.5 * (xl + xr)
    vmin = float(np.min(V(inner)))
    results = []
    lo = vmin - 1.0
    for j in range(count):
        f = lambda lam: _mismatch(bg, Omega, m, (xl, xr), bc, lam, tol, mid) - j * math.pi
        # the mismatch increases with lambda; lower end stays below the root
        while f(lo) > 0:
            lo -= max(1.0, abs(lo))
            if lo < vmin - 1e8:
                raise BracketFailure(f"no lower bracket for eigenvalue {j}")
        hi = max(lo + 1.0, (results[-1] if results else lo) + 1.0)
        step = 1.0
        tries = 0
        while f(hi) < 0:
            step *= 2
            hi += step
            tries += 1
            if tries > 80:
                raise BracketFailure(f"no upper bracket for eigenvalue {j}")
        lam = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        results.append(float(lam))
        lo = lam
    return results


def angular_solution(bg: CoefficientSet, Omega: float, m: int, lam: float, x_start: float, x_end: float,
                     S0: float = 1.0, dS0: float = 0.0, tol: float = 1e-12):
    """Dense solution (S, Delta_x S') of the angular ODE from given data at ``x_start``."""
    bgf = _float_bg(bg)
    p, V = _angular_coeffs(bgf, Omega, m)

    def rhs(x, y):
        return [y[1] / p(x), (V(x) - lam) * y[0]]

    sol = solve_ivp(rhs, (x_start, x_end), [S0, dS0 * p(x_start)], method="DOP853", rtol=tol,
                    atol=tol * 1e-3, dense_output=True)
    if not sol.success:
        raise StepFailure(sol.message)
    return sol.sol


def angular_from_endpoint(bg: CoefficientSet, Omega: float, m: int, lam: float, endpoint: float,
                          x_end: float, tol: float = 1e-12, order: int = 16):
    """Regular-branch angular solution launched from a simple zero of Delta_x.

    Returns a callable ``S(x)`` (real part of the dense solution)."""
    direction = 1 if x_end > endpoint else -1
    fd = frobenius_data(bg, endpoint, Omega, m, order, "angular", lam, direction)
    x0 = endpoint + direction * 10 * math.sqrt(tol)
    S0, dS0 = fd.evaluate(x0)
    sol = angular_solution(bg, Omega, m, lam, x0, x_end, S0.real, dS0.real, tol)
    return lambda x: float(sol(x)[0])


def full_operator_residual(bg: CoefficientSet, Omega, m: int, R: Callable, S: Callable,
                           r_pts: np.ndarray, x_pts: np.ndarray, h: float = 1e-3) -> float:
    """Max residual of rho^2 box u (k-term included) for u = e^{-i Omega t + i m phi} R(r) S(x).

    The r and x derivatives of the product are taken by fourth-order central
    differences with step ``h``; t and phi derivatives are exact.  The result
    is normalized by the max of |u| on the sample set.
    """
    bgf = _float_bg(bg)
    a = float(bgf.params.a)
    k = float(bgf.params.k)
    worst = 0.0
    scale = 0.0
    st = np.array([-2, -1, 0, 1, 2]) * h
    w1 = np.array([1, -8, 0, 8, -1]) / (12 * h)
    for r in r_pts:
        Rv = np.array([R(r + d) for d in st])
        for x in x_pts:
            Sv = np.array([S(x + d) for d in st])
            u = Rv[2] * Sv[2]
            # d_r (Delta_r d_r u) by nested fourth-order stencils
            fr = np.array([bgf.delta_r(r + d) * np.dot(w1, [R(r + d + e) for e in st]) for d in st])
            fx = np.array([bgf.delta_x(x + d) * np.dot(w1, [S(x + d + e) for e in st]) for d in st])
            div_r = np.dot(w1, fr) * Sv[2]
            div_x = np.dot(w1, fx) * Rv[2]
            dr, dx = bgf.delta_r(r), bgf.delta_x(x)
            s2 = 1 - x * x
            ra = r * r + a * a
            gtt = -ra * ra / dr + a * a * s2 * s2 / dx
            gtp = -a * ra / dr + a * s2 / dx
            gpp = -a * a / dr + 1 / dx
            # rho^2 box u with d_t -> -i Omega, d_phi -> i m
            stationary = (-Omega**2 * gtt + 2 * Omega * m * gtp - m * m * gpp) * u
            pot = (k / 3) * (r * r + a * a * x * x) * u
            res = div_r + div_x + stationary + pot
            worst = max(worst, abs(res))
            scale = max(scale, abs(u))
    return worst / scale if scale else worst


# ---------------------------------------------------------------------------
# zero-frequency classification


@dataclass(frozen=True)
class BranchReport:
    family: str
    ell: int
    extremal: bool
    variable: str  # description of the local variable
    regular_branch: str
    singular_branch: str
    infinity_behavior: str  # of the horizon-regular branch
    regular_growth_exponent: float  # measured/closed-form power at infinity
    singular_decay_exponent: float
    indicial_roots: tuple  # extremal: (ell, -ell-1); nonextremal: (0, 0) with log
    admissible_state: bool  # exists a nonzero horizon-regular decaying state
    checks: dict = field(default_factory=dict)


_FAMILIES = ("kerr", "rn", "kn", "extremal-kn")


def zero_frequency_classify(family: str, M: float, a: float = 0.0, Q: float = 0.0, ell: int = 0,
                            tol: float = 1e-12) -> BranchReport:
    """Classify the axisymmetric zero-frequency branches for a given ell.

    Nonextremal: in x = (r - M)/alpha, alpha = sqrt(M^2 - a^2 - Q^2), the
    radial equation is Legendre's; the horizon-regular branch is P_ell and the
    decaying branch is Q_ell, which has a logarithmic singularity at x = 1.
    Extremal: with y = r - M the equation is (y^2 R')' = ell(ell+1) R with
    exact branches y^ell and y^(-ell-1) (1 and -1/y at ell = 0).

    ``checks`` holds numerical confirmations: the Legendre Wronskian and
    recurrence identities, the log coefficient of Q_ell at the horizon, and
    fitted power laws at large distance.
    """
    fam = family.lower()
    if fam not in _FAMILIES:
        raise ParameterDomain(f"family must be one of {_FAMILIES}")
    if ell < 0 or int(ell) != ell:
        raise ParameterDomain("ell must be a nonnegative integer")
    if M <= 0:
        raise ParameterDomain("M must be positive")
    if fam == "kerr" and Q != 0:
        raise ParameterDomain("Kerr has Q = 0")
    if fam == "rn" and a != 0:
        raise ParameterDomain("Reissner-Nordstrom has a = 0")
    disc = M * M - a * a - Q * Q
    ell = int(ell)
    checks: dict = {}
    if fam == "extremal-kn":
        if abs(disc) > 1e-12 * M * M:
            raise ParameterDomain("extremal family requires a^2 + Q^2 = M^2")
        roots = tuple(sorted(np.roots([1.0, 1.0, -ell * (ell + 1)]).real.tolist(), reverse=True))
        checks["indicial_roots_numeric"] = roots
        # exact solutions of (y^2 R')' - ell(ell+1) R = 0 verified symbolically in coefficients
        for s in (ell, -ell - 1):
            checks[f"residual_y^{s}"] = (s * (s + 1) - ell * (ell + 1))
        reg = "constant 1" if ell == 0 else f"y^{ell}"
        sing = "-1/y" if ell == 0 else f"y^{-ell - 1}"
        return BranchReport(
            family=fam, ell=ell, extremal=True, variable="y = r - M",
            regular_branch=reg, singular_branch=sing,
            infinity_behavior="constant" if ell == 0 else f"grows like y^{ell}",
            regular_growth_exponent=float(ell), singular_decay_exponent=float(-ell - 1),
            indicial_roots=(ell, -ell - 1), admissible_state=False, checks=checks,
        )
    if disc <= 0:
        raise ParameterDomain("nonextremal families require a^2 + Q^2 < M^2")
    alpha = math.sqrt(disc)
    # horizon behavior of Q_ell: Q_ell(x) + 1/2 log(x - 1) P_ell(1) stays bounded
    # dyadic offsets keep x - 1 exact in binary; the slope error is O((x - 1) log(x - 1))
    eps = np.array([2.0**-30, 2.0**-40])
    q_near = np.array([legendre_q(max(ell, 1), 1 + e)[ell] for e in eps])
    log_coeff = (q_near[1] - q_near[0]) / (np.log(eps[1]) - np.log(eps[0]))
    checks["Q_log_coefficient"] = float(log_coeff)  # expected -1/2
    # growth at infinity (in x) of P_ell and decay of Q_ell
    xl = np.array([1e3, 1e4])
    p_far = np.array([legendre_p(ell, x)[ell] for x in xl])
    q_far = np.array([legendre_q(max(ell, 1), x)[ell] for x in xl])
    p_exp = float(np.diff(np.log(np.abs(p_far)))[0] / np.diff(np.log(xl))[0])
    q_exp = float(np.diff(np.log(np.abs(q_far)))[0] / np.diff(np.log(xl))[0])
    checks["P_growth_exponent"] = p_exp
    checks["Q_decay_exponent"] = q_exp
    # Legendre ODE residual of P and Q at a sample point, and the Wronskian
    x0 = 1.7
    pv = legendre_p(ell + 1, x0)
    qv = legendre_q(ell + 1, x0)
    dp = derivative_from_recurrence(pv, x0)
    dq = derivative_from_recurrence(qv, x0)
    dp0 = 0.0 if ell == 0 else dp[ell]
    dq0 = q_derivative(0, x0) if ell == 0 else dq[ell]
    checks["wronskian_residual"] = float(pv[ell] * dq0 - dp0 * qv[ell] - 1 / (1 - x0 * x0))
    return BranchReport(
        family=fam, ell=ell, extremal=False, variable=f"x = (r - M)/alpha, alpha = {alpha:.12g}",
        regular_branch=f"P_{ell}", singular_branch=f"Q_{ell} (logarithmic at x = 1)",
        infinity_behavior="constant" if ell == 0 else f"grows like x^{ell}",
        regular_growth_exponent=float(ell), singular_decay_exponent=float(-ell - 1),
        indicial_roots=(0, 0), admissible_state=False, checks=checks,
    )
