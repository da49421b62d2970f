"""Kerr-Newman exterior diagnostics: horizon constants, the subphoton
nontrapping sign factor, and the wall Jordan-obstruction value.

Throughout, Delta(r) = r^2 - 2 M r + a^2 + Q^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegratorFailure, ParameterDomain, Superextremal, WallRange
from .poly import SparsePoly


@dataclass(frozen=True)
class HorizonConstants:
    M: float
    a: float
    Q: float
    r_plus: float
    r_minus: float
    Omega_H: float
    kappa_plus: float
    extremal: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _disc(M, a, Q):
    return M * M - a * a - Q * Q


def horizon_constants(M: float, a: float = 0.0, Q: float = 0.0, rtol: float = 1e-14) -> HorizonConstants:
    """Horizon radii, horizon angular velocity and surface gravity.

    ``Omega_H = a / (r_+^2 + a^2)`` and ``kappa_+ = (r_+ - r_-) / (2 (r_+^2 + a^2))``.
    The discriminant is compared to zero with relative tolerance ``rtol``
    to set the extremal flag and to absorb rounding in a^2 + Q^2 = M^2 inputs.
    """
    if M <= 0:
        raise ParameterDomain("M must be positive")
    d = _disc(M, a, Q)
    if d < -rtol * M * M:
        raise Superextremal(f"a^2 + Q^2 = {a * a + Q * Q} exceeds M^2 = {M * M}")
    extremal = abs(d) <= rtol * M * M
    s = 0.0 if extremal else math.sqrt(d)
    rp, rm = M + s, M - s
    ra = rp * rp + a * a
    return HorizonConstants(float(M), float(a), float(Q), rp, rm, a / ra, (rp - rm) / (2 * ra), bool(extremal))


def delta_kn(r, M, a, Q):
    return r * r - 2 * M * r + a * a + Q * Q


def sign_factor(r, M, a, Q):
    """2 (r^2 (r - 3M) + a^2 (r + M) + 2 Q^2 r)."""
    return 2 * (r * r * (r - 3 * M) + a * a * (r + M) + 2 * Q * Q * r)


def A_kn(r, M, a, Q):
    """(r^2 + a^2)^2 / Delta, the radial part of the axisymmetric principal symbol weight."""
    return (r * r + a * a) ** 2 / delta_kn(r, M, a, Q)


def A_kn_derivative(r, M, a, Q):
    """(r^2 + a^2)(4 r Delta - (r^2 + a^2) Delta') / Delta^2."""
    d = delta_kn(r, M, a, Q)
    dp = 2 * r - 2 * M
    ra = r * r + a * a
    return ra * (4 * r * d - ra * dp) / (d * d)


def nontrapping_identity() -> SparsePoly:
    """4 r Delta - (r^2 + a^2) Delta' - factor as an exact polynomial (C3 stands for Q^2).

    Returns the residual polynomial, which is the zero polynomial."""
    r, M, a, Q2 = (SparsePoly.var(v) for v in ("r", "M", "a", "C3"))
    two = SparsePoly.const(2)
    delta = r * r - two * M * r + a * a + Q2
    ddelta = delta.diff("r")
    factor = two * (r * r * (r - SparsePoly.const(3) * M) + a * a * (r + M) + two * Q2 * r)
    return SparsePoly.const(4) * r * delta - (r * r + a * a) * ddelta - factor


@dataclass(frozen=True)
class MarginReport:
    M: float
    a: float
    Q: float
    R_w: float
    margin: float  # max of the sign factor over [r_+, R_w]
    argmax: float
    identity_zero: bool
    derivative_sign_agrees: bool
    verdict: str  # NONTRAPPING or TRAPPING

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _check_wall(M, a, Q, R_w, strict_range):
    d = _disc(M, a, Q)
    if d < -1e-14 * M * M:
        raise Superextremal("a^2 + Q^2 exceeds M^2")
    if d <= 1e-14 * M * M:
        raise ParameterDomain("wall diagnostics require a subextremal background")
    rp = M + math.sqrt(d)
    if not R_w > rp:
        raise WallRange(f"wall radius {R_w} must lie outside r_+ = {rp}")
    if strict_range and not (2 * M < R_w < 8 * M / 3):
        raise WallRange(f"wall radius {R_w} outside the admissible range (2M, 8M/3)")
    return rp


def nontrapping_margin(M: float, a: float, Q: float, R_w: float, resolution: int = 2001,
                       strict_range: bool = True) -> MarginReport:
    """Max of the nontrapping sign factor over [r_+, R_w].

    The maximum is taken over a uniform grid, both endpoints and the interior
    critical points of the cubic, so the reported margin is the exact maximum
    up to rounding.  Also samples dA/dr and checks its sign agrees with the
    factor (they differ by a positive multiple off the horizon).
    """
    rp = _check_wall(M, a, Q, R_w, strict_range)
    ident = nontrapping_identity().is_zero()
    rs = list(np.linspace(rp, R_w, resolution))
    # f(r)/2 = r^3 - 3M r^2 + (a^2 + 2Q^2) r + a^2 M; critical points of the cubic
    for c in np.roots([3.0, -6.0 * M, a * a + 2 * Q * Q]):
        if abs(c.imag) < 1e-14 and rp < c.real < R_w:
            rs.append(float(c.real))
    rs = np.array(rs)
    f = sign_factor(rs, M, a, Q)
    i = int(np.argmax(f))
    margin = float(f[i])
    inner = rs[(rs > rp) & (rs <= R_w)]
    inner = inner[delta_kn(inner, M, a, Q) > 1e-8]
    agrees = bool(np.all(np.sign(A_kn_derivative(inner, M, a, Q)) == np.sign(sign_factor(inner, M, a, Q))))
    verdict = "NONTRAPPING" if margin < 0 else "TRAPPING"
    return MarginReport(float(M), float(a), float(Q), float(R_w), margin, float(rs[i]), ident, agrees, verdict)


@dataclass(frozen=True)
class ObstructionReport:
    M: float
    a: float
    Q: float
    R_w: float
    numeric: float  # psi_0'(R_w) + H'(R_w) from the integrated ODE
    closed_form: float  # (r_+^2 + a^2) / Delta(R_w)
    relative_gap: float
    pointwise_max_gap: float  # identity psi_0' + H' = C / Delta at interior radii
    nonzero: bool
    samples: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["samples"] = {k: list(map(float, v)) for k, v in self.samples.items()}
        return d


def wall_jordan_obstruction(M: float, a: float, Q: float, R_w: float, tol: float = 1e-13,
                            strict_range: bool = True) -> ObstructionReport:
    """Integrate Delta psi_0' = C - (2 M r - Q^2), C = r_+^2 + a^2, outward from r_+.

    The right-hand side has a removable zero at r_+ (both sides vanish), so the
    ODE is integrated for the pair (psi_0, psi_0') with psi_0'' obtained by
    differentiating the ODE; its value at r_+ is the l'Hopital limit.  The
    returned numeric value is psi_0'(R_w) + H'(R_w), H' = (2 M r - Q^2)/Delta.
    """
    rp = _check_wall(M, a, Q, R_w, strict_range)
    C = rp * rp + a * a
    # Delta psi'' + Delta' psi' = -2M; at r_+ psi' = (-2M) / Delta'(r_+)
    def rhs(r, y):
        d = delta_kn(r, M, a, Q)
        dp = 2 * r - 2 * M
        return [y[1], (-2 * M - dp * y[1]) / d]

    dp_plus = 2 * rp - 2 * M
    p0 = -2 * M / dp_plus
    # start a short Taylor step off the horizon: psi'' (r_+) from the derivative of the ODE
    #   Delta' psi'' + Delta'' psi' ... at r_+: 2 Delta' psi'' + Delta'' psi' = 0
    p1 = -2.0 * p0 / (2 * dp_plus)
    eps = 1e-6 * max(1.0, R_w - rp)
    y0 = [p0 * eps + 0.5 * p1 * eps * eps, p0 + p1 * eps]
    radii = np.linspace(rp + eps, R_w, 12)[1:-1]
    sol = solve_ivp(rhs, (rp + eps, R_w), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    psi_prime_w = float(sol.y[1, -1])
    H_prime = lambda r: (2 * M * r - Q * Q) / delta_kn(r, M, a, Q)
    numeric = psi_prime_w + H_prime(R_w)
    closed = C / delta_kn(R_w, M, a, Q)
    inner = sol.sol(radii)[1] + H_prime(radii)
    target = C / delta_kn(radii, M, a, Q)
    gap = float(np.max(np.abs(inner - target) / np.abs(target)))
    return ObstructionReport(float(M), float(a), float(Q), float(R_w), float(numeric), float(closed),
                             float(abs(numeric - closed) / abs(closed)), gap, bool(numeric > 0),
                             {"r": radii, "psi_plus_H": inner, "C_over_Delta": target})
