"""Carter metric family: quartic coefficient functions, stationary-block
quantities, slab positivity checks and the Kerr-Newman embedding.

Every evaluator works with Python/gmpy2 rationals (exact mode) as well as
floats and numpy arrays (float mode); the arithmetic is the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import DegeneratePoint, StabilityRequiresK0


def _exact(v):
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return v


@dataclass(frozen=True)
class CarterParams:
    """Raw parameters of the Carter family.

    Derived coefficients (``alpha*``, ``beta*``, ``delta``) are properties and
    are recomputed on every access.  With ``exact=True`` all inputs are
    converted to :class:`fractions.Fraction`.
    """

    M: Any = 1
    a: Any = 0
    Lambda: Any = 0
    k: Any = 0
    C1: Any = 0
    C2: Any = 0
    C3: Any = 0
    C4: Any = 0
    C5: Any = 0
    exact: bool = False

    def __post_init__(self):
        for name in ("M", "a", "Lambda", "k", "C1", "C2", "C3", "C4", "C5"):
            v = getattr(self, name)
            object.__setattr__(self, name, _exact(v) if self.exact else float(v))

    @property
    def alpha2(self):
        return 1 - self.Lambda * self.a**2 / 3 + self.C1 / 2

    @property
    def alpha1(self):
        return self.C2 - 2 * self.M

    @property
    def alpha0(self):
        return self.a**2 + self.C3

    @property
    def alpha4(self):
        """Coefficient of r^4 in Delta_r (the k-term)."""
        return -self.k / 12

    @property
    def beta2(self):
        return -self.alpha2

    @property
    def beta1(self):
        return -self.C4

    @property
    def beta0(self):
        return 1 + self.C5

    @property
    def beta4(self):
        """Coefficient of x^4 in Delta_x (the k-term)."""
        return -self.k * self.a**2 / 12

    @property
    def delta(self):
        return einstein_defect(self)

    def with_(self, **changes) -> "CarterParams":
        return replace(self, **changes)

    def require_k0(self) -> None:
        if self.k != 0:
            raise StabilityRequiresK0(f"stability analysis needs k = 0, got k = {self.k}")


def einstein_defect(p: CarterParams):
    """delta = C3 - a^2 C5; the metric is Einstein exactly when this vanishes."""
    return p.C3 - p.a**2 * p.C5


def kn_embed(M, a, Q, exact: bool = False) -> CarterParams:
    """Kerr-Newman as a Carter member: only C3 = Q^2 is switched on."""
    if (Fraction(M) if exact else float(M)) <= 0:
        raise ValueError("M must be positive")
    Q = _exact(Q) if exact else float(Q)
    return CarterParams(M=M, a=a, C3=Q * Q, exact=exact)


@dataclass(frozen=True)
class CoefficientSet:
    """Evaluators for the coefficient functions of one parameter set."""

    params: CarterParams

    @property
    def a(self):
        return self.params.a

    # quartics ---------------------------------------------------------
    def delta_r(self, r):
        p = self.params
        return ((p.alpha4 * r + 0) * r + p.alpha2) * r * r + p.alpha1 * r + p.alpha0

    def delta_r_prime(self, r):
        p = self.params
        return 4 * p.alpha4 * r**3 + 2 * p.alpha2 * r + p.alpha1

    def delta_r_second(self, r):
        p = self.params
        return 12 * p.alpha4 * r**2 + 2 * p.alpha2

    def delta_x(self, x):
        p = self.params
        return (p.beta4 * x * x + p.beta2) * x * x + p.beta1 * x + p.beta0

    def delta_x_prime(self, x):
        p = self.params
        return 4 * p.beta4 * x**3 + 2 * p.beta2 * x + p.beta1

    def delta_x_second(self, x):
        p = self.params
        return 12 * p.beta4 * x**2 + 2 * p.beta2

    def rho2(self, r, x):
        return r * r + self.a**2 * x * x

    # stationary block, multiplied through by Delta_r Delta_x -----------
    def A_numerator(self, r, x):
        """A * Delta_r * Delta_x."""
        a = self.a
        return (r * r + a * a) ** 2 * self.delta_x(x) - a * a * (1 - x * x) ** 2 * self.delta_r(r)

    def B_numerator(self, r, x):
        """B * Delta_r * Delta_x with B = rho^2 g^{t phi}."""
        a = self.a
        return -a * (r * r + a * a) * self.delta_x(x) + a * (1 - x * x) * self.delta_r(r)

    def Phi_numerator(self, r, x):
        """Phi * Delta_r * Delta_x."""
        return self.delta_r(r) - self.a**2 * self.delta_x(x)

    def A(self, r, x):
        return self.A_numerator(r, x) / (self.delta_r(r) * self.delta_x(x))

    def B(self, r, x):
        return self.B_numerator(r, x) / (self.delta_r(r) * self.delta_x(x))

    def Phi(self, r, x):
        return self.Phi_numerator(r, x) / (self.delta_r(r) * self.delta_x(x))


def build_coefficients(p: CarterParams) -> CoefficientSet:
    return CoefficientSet(p)


@dataclass(frozen=True)
class InverseBlockSample:
    """Inverse-metric entries times rho^2, and the covariant (t, phi) block."""

    rho2_gtt: Any
    rho2_gtphi: Any
    rho2_gphiphi: Any
    rho2_grr: Any
    rho2_gxx: Any
    g_tt: Any
    g_tphi: Any
    g_phiphi: Any
    g_rr: Any
    g_xx: Any
    delta_r: Any
    delta_x: Any
    rho2: Any

    @property
    def block_det(self):
        return self.g_tt * self.g_phiphi - self.g_tphi**2

    @property
    def block_det_residual(self):
        """g_tt g_phiphi - g_tphi^2 + Delta_r Delta_x, zero for every valid sample."""
        return self.block_det + self.delta_r * self.delta_x


def evaluate_blocks(c: CoefficientSet, r, x) -> InverseBlockSample:
    if c.params.exact:
        r, x = _exact(r), _exact(x)
    a = c.a
    dr, dx, rho2 = c.delta_r(r), c.delta_x(x), c.rho2(r, x)
    if dr == 0 or dx == 0 or rho2 == 0:
        raise DegeneratePoint(f"structured denominator vanishes at r={r}, x={x}")
    s = 1 - x * x
    ra = r * r + a * a
    return InverseBlockSample(
        rho2_gtt=-ra * ra / dr + a * a * s * s / dx,
        rho2_gtphi=-a * ra / dr + a * s / dx,
        rho2_gphiphi=-a * a / dr + 1 / dx,
        rho2_grr=dr,
        rho2_gxx=dx,
        g_tt=(a * a * dx - dr) / rho2,
        g_tphi=(a * s * dr - a * ra * dx) / rho2,
        g_phiphi=(ra * ra * dx - a * a * s * s * dr) / rho2,
        g_rr=rho2 / dr,
        g_xx=rho2 / dx,
        delta_r=dr,
        delta_x=dx,
        rho2=rho2,
    )


# ---------------------------------------------------------------------------
# slab classification


@dataclass(frozen=True)
class SlabSpec:
    r_minus: float
    r_plus: float
    x_minus: float
    x_plus: float
    margin: float = 1e-8

    def __post_init__(self):
        if not (self.r_minus < self.r_plus and self.x_minus < self.x_plus):
            raise ValueError("slab intervals must be nondegenerate")
        if not self.margin > 0:
            raise ValueError("margin must be positive")


_COEFFS = ("rho2", "Delta_r", "Delta_x", "A", "Phi")


@dataclass(frozen=True)
class SlabClassification:
    verdict: str  # "STRICT" or "REJECT"
    minima: dict
    safety: dict
    offending: str | None = None

    @property
    def strict(self) -> bool:
        return self.verdict == "STRICT"

    @property
    def certified_margin(self) -> float:
        """Smallest (grid minimum - Lipschitz allowance) over the five coefficients."""
        return min(self.minima[n] - self.safety[n] for n in _COEFFS)


def _sample(c: CoefficientSet, R, X):
    dr = c.delta_r(R)
    dx = c.delta_x(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = {
            "rho2": c.rho2(R, X),
            "Delta_r": dr * np.ones_like(X),
            "Delta_x": dx * np.ones_like(R),
            "A": c.A_numerator(R, X) / (dr * dx),
            "Phi": c.Phi_numerator(R, X) / (dr * dx),
        }
    return vals


def classify_slab(c: CoefficientSet, s: SlabSpec, resolution: int = 64) -> SlabClassification:
    """Sample rho^2, Delta_r, Delta_x, A, Phi on a tensor grid.

    The safety allowance for each coefficient is ``L_r h_r/2 + L_x h_x/2``
    where ``L_*`` are the largest sampled one-sided difference quotients:
    a first-order bound for how far the true minimum can dip below the grid
    minimum between nodes.  A coefficient that is not positive at some node,
    or whose grid minimum minus allowance is below ``s.margin``, rejects the
    slab.  The coefficients are checked in the order rho^2, Delta_r, Delta_x,
    A, Phi and the first failure is reported.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    r = np.linspace(float(s.r_minus), float(s.r_plus), resolution)
    x = np.linspace(float(s.x_minus), float(s.x_plus), resolution)
    R, X = np.meshgrid(r, x, indexing="ij")
    fc = c if not c.params.exact else CoefficientSet(_float_params(c.params))
    vals = _sample(fc, R, X)
    hr, hx = r[1] - r[0], x[1] - x[0]
    minima, safety = {}, {}
    offending = None
    for name in _COEFFS:
        v = vals[name]
        finite = np.all(np.isfinite(v))
        mn = float(np.min(v)) if finite else -np.inf
        if finite:
            lr = np.max(np.abs(np.diff(v, axis=0))) / hr
            lx = np.max(np.abs(np.diff(v, axis=1))) / hx
            sf = 0.5 * (lr * hr + lx * hx)
        else:
            sf = np.inf
        minima[name] = mn
        safety[name] = float(sf)
        if offending is None and (mn <= 0 or mn - sf < s.margin):
            offending = name
    verdict = "STRICT" if offending is None else "REJECT"
    return SlabClassification(verdict, minima, safety, offending)


def _float_params(p: CarterParams) -> CarterParams:
    return CarterParams(
        M=float(p.M), a=float(p.a), Lambda=float(p.Lambda), k=float(p.k),
        C1=float(p.C1), C2=float(p.C2), C3=float(p.C3), C4=float(p.C4), C5=float(p.C5),
    )


def to_float(p: CarterParams) -> CarterParams:
    """Float-mode copy of an exact parameter set."""
    return _float_params(p)
