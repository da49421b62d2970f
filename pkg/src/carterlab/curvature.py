"""Exact curvature certificates for the Carter family.

The metric is entered through closed-form polynomials for rho^2, Delta_r and
Delta_x; Christoffel symbols, Ricci tensor and the scalar curvature are then
computed as :class:`~carterlab.poly.RatFun` objects, and each certificate
numerator is tested for being the zero polynomial.

Coordinates are ordered ``(t, r, x, phi)``.  Only ``r`` and ``x`` derivatives
are nonzero since the metric is stationary and axisymmetric.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Mapping, Sequence

from .errors import CertificateFailure, EvaluationAtPole
from .jets import Jet
from .poly import DenominatorBasis, RatFun, SparsePoly, VARS, poly_sum, rational, ratfun_sum, unpack

T, R, X, P = 0, 1, 2, 3
COORDS = ("t", "r", "x", "phi")
_DVAR = {R: "r", X: "x"}

DEFECT_COMPONENTS = ("t_t", "t_phi", "phi_t", "phi_phi", "r_r", "x_x")


def _v(name, power=1):
    return SparsePoly.var(name, power)


def _c(value):
    return SparsePoly.const(value)


@dataclass(frozen=True)
class SymbolicCarter:
    """Polynomials describing a (possibly specialized) Carter background.

    ``subs`` fixes some of the variables to exact rationals before anything is
    built, which is how the fast bivariate spot-check pipeline is obtained.
    """

    subs: Mapping[str, object] = field(default_factory=dict)

    def _s(self, p: SparsePoly) -> SparsePoly:
        return p.subs(self.subs) if self.subs else p

    @property
    def a(self) -> SparsePoly:
        return self._s(_v("a"))

    @property
    def delta_r(self) -> SparsePoly:
        a2 = _v("a", 2)
        alpha2 = _c(1) - _v("Lambda") * a2 * _c(Fraction(1, 3)) + _v("C1") * _c(Fraction(1, 2))
        alpha1 = _v("C2") - _v("M") * _c(2)
        alpha0 = a2 + _v("C3")
        p = (
            -_v("k") * _v("r", 4) * _c(Fraction(1, 12))
            + alpha2 * _v("r", 2)
            + alpha1 * _v("r")
            + alpha0
        )
        return self._s(p)

    @property
    def delta_x(self) -> SparsePoly:
        a2 = _v("a", 2)
        alpha2 = _c(1) - _v("Lambda") * a2 * _c(Fraction(1, 3)) + _v("C1") * _c(Fraction(1, 2))
        p = (
            -_v("k") * a2 * _v("x", 4) * _c(Fraction(1, 12))
            - alpha2 * _v("x", 2)
            - _v("C4") * _v("x")
            + _c(1)
            + _v("C5")
        )
        return self._s(p)

    @property
    def rho2(self) -> SparsePoly:
        return self._s(_v("r", 2) + _v("a", 2) * _v("x", 2))

    @property
    def k(self) -> SparsePoly:
        return self._s(_v("k"))

    @property
    def delta(self) -> SparsePoly:
        return self._s(_v("C3") - _v("a", 2) * _v("C5"))


MetricMutation = Callable[[Dict[tuple, RatFun], DenominatorBasis, SymbolicCarter], None]


def flip_gtphi_term(g: Dict[tuple, RatFun], basis: DenominatorBasis, bg: SymbolicCarter) -> None:
    """Fault injection: flip the sign of the a(1-x^2)Delta_r term of g_{t phi}."""
    a = bg.a
    one_m_x2 = _c(1) - _v("x", 2)
    rho2, dr, dx = basis.factors
    ra = _v("r", 2) + a * a
    wrong = RatFun(-(a * one_m_x2 * dr) - a * ra * dx, (1, 0, 0), basis)
    g[(T, P)] = g[(P, T)] = wrong


def metric_tables(bg: SymbolicCarter, mutation: MetricMutation | None = None):
    """Covariant and inverse metric as ``{(mu, nu): RatFun}`` dictionaries.

    The inverse is always the closed form for the unmutated family, so a
    mutation shows up both in the Ricci numerators and in g g^{-1} = I.
    """
    rho2, dr, dx = bg.rho2, bg.delta_r, bg.delta_x
    basis = DenominatorBasis(rho2, dr, dx)
    a = bg.a
    s = _c(1) - _v("x", 2)
    ra = _v("r", 2) + a * a

    def rf(num, pows):
        return RatFun(num, pows, basis)

    g = {
        (T, T): rf(a * a * dx - dr, (1, 0, 0)),
        (T, P): rf(a * s * dr - a * ra * dx, (1, 0, 0)),
        (P, P): rf(ra * ra * dx - a * a * s * s * dr, (1, 0, 0)),
        (R, R): rf(rho2, (0, 1, 0)),
        (X, X): rf(rho2, (0, 0, 1)),
    }
    g[(P, T)] = g[(T, P)]
    if mutation is not None:
        mutation(g, basis, bg)
    ginv = {
        (T, T): rf(a * a * s * s * dr - ra * ra * dx, (1, 1, 1)),
        (T, P): rf(a * s * dr - a * ra * dx, (1, 1, 1)),
        (P, P): rf(dr - a * a * dx, (1, 1, 1)),
        (R, R): rf(dr, (1, 0, 0)),
        (X, X): rf(dx, (1, 0, 0)),
    }
    ginv[(P, T)] = ginv[(T, P)]
    return g, ginv, basis


def _get(table, i, j, basis):
    f = table.get((i, j))
    return f if f is not None else RatFun(SparsePoly(), (0, 0, 0), basis)


def christoffel_table(bg: SymbolicCarter | None = None, mutation: MetricMutation | None = None):
    """Gamma^l_{mn} for all 40 index combinations with m <= n.

    Returns ``(gamma, g, ginv, basis)`` where ``gamma[(l, m, n)]`` is defined
    for every ``m <= n`` and also stored under ``(l, n, m)``.
    """
    bg = bg or SymbolicCarter()
    g, ginv, basis = metric_tables(bg, mutation)
    zero = RatFun(SparsePoly(), (0, 0, 0), basis)
    # dg[(c, a, b)] = d_c g_ab
    dg = {}
    for c in (R, X):
        for (i, j), f in g.items():
            dg[(c, i, j)] = f.diff(_DVAR[c])

    def d(c, i, j):
        return dg.get((c, i, j), zero) if c in (R, X) else zero

    # lowered symbols Gamma_{a mn}
    low = {}
    for a_ in range(4):
        for m in range(4):
            for n in range(m, 4):
                parts = [d(m, a_, n), d(n, a_, m), -d(a_, m, n)]
                low[(a_, m, n)] = ratfun_sum(parts, basis) * Fraction(1, 2)
    gamma = {}
    for l in range(4):
        for m in range(4):
            for n in range(m, 4):
                parts = []
                for a_ in range(4):
                    gi = ginv.get((l, a_))
                    if gi is None or low[(a_, m, n)].is_zero():
                        continue
                    parts.append(gi * low[(a_, m, n)])
                val = ratfun_sum(parts, basis)
                gamma[(l, m, n)] = val
                gamma[(l, n, m)] = val
    return gamma, g, ginv, basis


def ricci_lower(gamma, basis, bg: SymbolicCarter):
    """R_{mn} via R_mn = d_l G^l_mn - d_m d_n ln rho^2 + G^l_mn d_l ln rho^2 - G^l_ns G^s_ml.

    Uses sqrt|det g| = rho^2 for the contracted symbol.  Returns a dict over
    ``m <= n``.
    """
    zero = RatFun(SparsePoly(), (0, 0, 0), basis)
    rho2 = basis.factors[0]
    # d_l ln rho^2 as RatFun
    dln = {R: RatFun(rho2.diff("r"), (1, 0, 0), basis), X: RatFun(rho2.diff("x"), (1, 0, 0), basis)}
    ric = {}
    for m in range(4):
        for n in range(m, 4):
            parts = []
            for l in (R, X):
                gl = gamma[(l, m, n)]
                if not gl.is_zero():
                    parts.append(gl.diff(_DVAR[l]))
                    parts.append(gl * dln[l])
            if m in (R, X) and n in (R, X):
                parts.append(-dln[n].diff(_DVAR[m]))
            for l in range(4):
                for s in range(4):
                    g1, g2 = gamma[(l, n, s)], gamma[(s, m, l)]
                    if g1.is_zero() or g2.is_zero():
                        continue
                    parts.append(-(g1 * g2))
            ric[(m, n)] = ratfun_sum(parts, basis) if parts else zero
    return ric


@dataclass
class CurvatureData:
    basis: DenominatorBasis
    bg: SymbolicCarter
    mixed: Dict[tuple, RatFun]
    scalar: RatFun
    g: Dict[tuple, RatFun]
    ginv: Dict[tuple, RatFun]
    gamma: Dict[tuple, RatFun]


def curvature(bg: SymbolicCarter | None = None, mutation: MetricMutation | None = None) -> CurvatureData:
    bg = bg or SymbolicCarter()
    gamma, g, ginv, basis = christoffel_table(bg, mutation)
    ric = ricci_lower(gamma, basis, bg)

    def R_low(i, j):
        return ric[(min(i, j), max(i, j))]

    mixed = {}
    for mu in range(4):
        for nu in range(4):
            parts = []
            for al in range(4):
                gi = ginv.get((mu, al))
                if gi is None:
                    continue
                rl = R_low(al, nu)
                if rl.is_zero():
                    continue
                parts.append(gi * rl)
            mixed[(mu, nu)] = ratfun_sum(parts, basis)
    scalar = ratfun_sum([mixed[(i, i)] for i in range(4)], basis)
    return CurvatureData(basis, bg, mixed, scalar, g, ginv, gamma)


def _closed_form_targets(bg: SymbolicCarter):
    """(mixed index, rho power, closed-form numerator) for the six defect components."""
    a = bg.a
    a2 = a * a
    r2, x2 = _v("r", 2), _v("x", 2)
    dl = bg.delta
    return {
        "t_t": ((T, T), 6, dl * (a2 * x2 - r2 - a2 * _c(2))),
        "t_phi": ((T, P), 6, dl * a * (r2 + a2) * (_c(1) - x2) * _c(2)),
        "phi_t": ((P, T), 6, -(dl * a * _c(2))),
        "phi_phi": ((P, P), 6, -(dl * (a2 * x2 - r2 - a2 * _c(2)))),
        "r_r": ((R, R), 4, -dl),
        "x_x": ((X, X), 4, dl),
    }


def _numerator_minus(f: RatFun, rho_power: int, closed: SparsePoly, counter=None) -> SparsePoly:
    """Numerator of rho^p f - closed over f's remaining structured denominator.

    ``rho_power`` counts powers of rho, so it is halved to count rho^2 factors.
    """
    lifted = f.times_factor(0, rho_power // 2)
    target = RatFun(closed, (0, 0, 0), f.basis)
    diff = ratfun_sum([lifted, -target], f.basis, counter)
    return diff.num


def ricci_defect_numerators(bg: SymbolicCarter | None = None, mutation: MetricMutation | None = None,
                            data: CurvatureData | None = None, counts: dict | None = None):
    """The six defect numerators and the scalar numerator ``N_R``.

    ``N_R`` is the numerator of ``rho^2 R + Delta_r'' + Delta_x''``; the
    defect numerators are those of ``rho^6 S^mu_nu - closed form`` (``rho^4``
    for the r and x components) with ``S = Ric - (k/4) Id``.  Returns an
    ordered dict ``name -> SparsePoly``; ``counts`` (if given) receives the
    pre-cancellation term count of each combination.
    """
    data = data or curvature(bg, mutation)
    bg = data.bg
    basis = data.basis
    out = {}
    quarter_k = RatFun(bg.k * _c(Fraction(1, 4)), (0, 0, 0), basis)
    dr2 = bg.delta_r.diff("r").diff("r")
    dx2 = bg.delta_x.diff("x").diff("x")
    cnt = [0]
    nr = ratfun_sum([data.scalar.times_factor(0, 1), RatFun(dr2 + dx2, (0, 0, 0), basis)], basis, cnt)
    out["scalar"] = nr.num
    if counts is not None:
        counts["scalar"] = cnt[0]
    for name, (idx, power, closed) in _closed_form_targets(bg).items():
        comp = data.mixed[idx]
        if idx[0] == idx[1]:
            comp = comp - quarter_k
        cnt = [0]
        out[name] = _numerator_minus(comp, power, closed, cnt)
        if counts is not None:
            counts[name] = cnt[0]
    return out


def inverse_check_numerators(data: CurvatureData) -> Dict[str, SparsePoly]:
    """Numerators of g g^{-1} - I, keyed like ``'t,phi'``."""
    basis = data.basis
    one = RatFun(_c(1), (0, 0, 0), basis)
    out = {}
    for i in range(4):
        for j in range(4):
            parts = []
            for k_ in range(4):
                a_, b_ = data.g.get((i, k_)), data.ginv.get((k_, j))
                if a_ is not None and b_ is not None:
                    parts.append(a_ * b_)
            if i == j:
                parts.append(-one)
            out[f"{COORDS[i]},{COORDS[j]}"] = ratfun_sum(parts, basis).num
    return out


def trace_free_check(data: CurvatureData) -> SparsePoly:
    """Numerator of S^t_t + S^phi_phi + S^r_r + S^x_x."""
    basis = data.basis
    k_term = RatFun(data.bg.k, (0, 0, 0), basis)
    return ratfun_sum([data.mixed[(i, i)] for i in range(4)] + [-k_term], basis).num


@dataclass
class CertReport:
    scalar_ok: bool
    defect_components: list  # (name, is_zero, term_count_before_cancel)
    inverse_ok: bool
    elapsed: float
    max_terms: int = 0

    @property
    def passed(self) -> bool:
        return self.scalar_ok and self.inverse_ok and all(ok for _, ok, _ in self.defect_components)

    def to_dict(self) -> dict:
        return {
            "scalar_ok": self.scalar_ok,
            "inverse_ok": self.inverse_ok,
            "defect_components": [
                {"component": n, "zero": ok, "terms_before_cancel": c} for n, ok, c in self.defect_components
            ],
            "passed": self.passed,
            "elapsed_seconds": round(self.elapsed, 3),
        }


def _first_nonzero(name: str, p: SparsePoly) -> CertificateFailure:
    mono, coef = p.first_term()
    return CertificateFailure(name, mono, coef)


def verify_certificates(bg: SymbolicCarter | None = None, mutation: MetricMutation | None = None,
                        raise_on_failure: bool = True, data: CurvatureData | None = None) -> CertReport:
    """Run the full symbolic certificate.

    ``data`` reuses an already computed :func:`curvature` result (``bg`` and
    ``mutation`` are then ignored).  Raises :class:`CertificateFailure` for the first nonzero numerator (order:
    scalar, the six defect components, then g g^{-1} = I) unless
    ``raise_on_failure`` is false, in which case the report carries the flags.
    """
    t0 = time.perf_counter()
    data = data or curvature(bg, mutation)
    counts: dict = {}
    nums = ricci_defect_numerators(data=data, counts=counts)
    inv = inverse_check_numerators(data)
    elapsed = time.perf_counter() - t0
    report = CertReport(
        scalar_ok=nums["scalar"].is_zero(),
        defect_components=[(n, nums[n].is_zero(), counts[n]) for n in DEFECT_COMPONENTS],
        inverse_ok=all(p.is_zero() for p in inv.values()),
        elapsed=elapsed,
        max_terms=max(counts.values()),
    )
    if raise_on_failure and not report.passed:
        for name in ("scalar",) + DEFECT_COMPONENTS:
            if not nums[name].is_zero():
                raise _first_nonzero(name, nums[name])
        for name, p in inv.items():
            if not p.is_zero():
                raise _first_nonzero("inverse " + name, p)
    return report


# ---------------------------------------------------------------------------
# seeded exact spot checks

PARAM_VARS = ("a", "k", "Lambda", "M", "C1", "C2", "C3", "C4", "C5")


def _random_rational(rng: random.Random, span: int = 7, den: int = 5) -> Fraction:
    return Fraction(rng.randint(-span * den, span * den), rng.randint(1, den))


def spot_check_point(params: Mapping[str, object], r, x, mutation: MetricMutation | None = None) -> dict:
    """Exact values of the seven symbolic numerators at one point.

    Parameters are substituted first, so the curvature is computed over
    Q[r, x] only; the result is then evaluated at ``(r, x)``.
    """
    params = {k: rational(v) for k, v in params.items()}
    bg = SymbolicCarter(subs=params)
    pt = {"r": rational(r), "x": rational(x)}
    _check_pole(bg, pt)
    nums = ricci_defect_numerators(bg, mutation)
    return {name: p.evaluate(pt) for name, p in nums.items()}


def _check_pole(bg: SymbolicCarter, pt) -> None:
    if not (bg.rho2.evaluate(pt) and bg.delta_r.evaluate(pt) and bg.delta_x.evaluate(pt)):
        raise EvaluationAtPole(f"structured denominator vanishes at r={pt['r']}, x={pt['x']}")


def _ratfun_jet(f: RatFun, factor_jets, r0, x0, order: int) -> Jet:
    j = Jet.from_poly(f.num, r0, x0, order)
    for fj, p in zip(factor_jets, f.den_pows):
        if p:
            j = j / fj.pow(p)
    return j


def defect_residuals_at_point(params: Mapping[str, object], r, x,
                              mutation: MetricMutation | None = None) -> dict:
    """Exact certificate residuals at one point via second-order Taylor jets.

    Returns ``rho^2 R + Delta_r'' + Delta_x''`` under ``'scalar'`` and
    ``rho^p S^mu_nu - closed form`` for the six defect components.  Off the
    structured poles each residual vanishes exactly when the corresponding
    numerator does, since the two differ by a nonzero product of powers of
    rho^2, Delta_r and Delta_x.
    """
    params = {k: rational(v) for k, v in params.items()}
    bg = SymbolicCarter(subs=params)
    r0, x0 = rational(r), rational(x)
    pt = {"r": r0, "x": x0}
    _check_pole(bg, pt)
    g_rf, ginv_rf, basis = metric_tables(bg, mutation)
    fj2 = [Jet.from_poly(f, r0, x0, 2) for f in basis.factors]
    fj1 = [Jet.from_poly(f, r0, x0, 1) for f in basis.factors]
    g = {k: _ratfun_jet(v, fj2, r0, x0, 2) for k, v in g_rf.items()}
    ginv = {k: _ratfun_jet(v, fj1, r0, x0, 1) for k, v in ginv_rf.items()}
    zero1 = Jet({}, 1)

    def dg(c, i, j):
        f = g.get((i, j))
        if f is None or c not in (R, X):
            return zero1
        return f.diff(_DVAR[c])

    gamma = {}
    for l in range(4):
        for m in range(4):
            for n in range(m, 4):
                acc = zero1
                for a_ in range(4):
                    gi = ginv.get((l, a_))
                    if gi is None:
                        continue
                    acc = acc + gi * (dg(m, a_, n) + dg(n, a_, m) - dg(a_, m, n))
                gamma[(l, m, n)] = gamma[(l, n, m)] = acc * Fraction(1, 2)
    rho2 = fj2[0]
    dln = {R: rho2.diff("r") / rho2, X: rho2.diff("x") / rho2}
    ric = {}
    for m in range(4):
        for n in range(m, 4):
            acc = Jet({}, 0)
            for l in (R, X):
                acc = acc + gamma[(l, m, n)].diff(_DVAR[l]) + gamma[(l, m, n)] * dln[l]
            if m in (R, X) and n in (R, X):
                acc = acc - dln[n].diff(_DVAR[m])
            for l in range(4):
                for s_ in range(4):
                    acc = acc - gamma[(l, n, s_)] * gamma[(s_, m, l)]
            ric[(m, n)] = ric[(n, m)] = acc.value()
    ginv0 = {k: v.value() for k, v in ginv.items()}
    mixed = {
        (mu, nu): sum((ginv0[(mu, al)] * ric[(al, nu)] for al in range(4) if (mu, al) in ginv0), rational(0))
        for mu in range(4) for nu in range(4)
    }
    kv = bg.k.evaluate({})
    rho2v = rho2.value()
    scalar = sum((mixed[(i, i)] for i in range(4)), rational(0))
    d2 = (bg.delta_r.diff("r").diff("r") + bg.delta_x.diff("x").diff("x")).evaluate(pt)
    out = {"scalar": rho2v * scalar + d2}
    for name, (idx, power, closed) in _closed_form_targets(bg).items():
        val = mixed[idx] - (kv / 4 if idx[0] == idx[1] else 0)
        out[name] = rho2v ** (power // 2) * val - closed.evaluate(pt)
    return out


def spot_check_random(n_points: int, seed: int = 0, mutation: MetricMutation | None = None,
                      params: Mapping[str, object] | None = None, max_resample: int = 100) -> bool:
    """Evaluate all seven certificate residuals at ``n_points`` seeded rational points.

    Every draw assigns all eleven variables (nine parameters and r, x) unless
    ``params`` pins some parameters.  A draw that hits a zero of rho^2,
    Delta_r or Delta_x is redrawn (up to ``max_resample`` times per point).
    Returns true iff every residual is exactly zero at every point.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    rng = random.Random(seed)
    for _ in range(n_points):
        for _attempt in range(max_resample):
            pv = {v: _random_rational(rng) for v in PARAM_VARS}
            if params:
                pv.update(params)
            r, x = _random_rational(rng), _random_rational(rng)
            try:
                vals = defect_residuals_at_point(pv, r, x, mutation)
            except EvaluationAtPole:
                continue
            break
        else:
            raise EvaluationAtPole("could not draw a point off the structured poles")
        if any(v != 0 for v in vals.values()):
            return False
    return True


def degree_bounds(nums: Mapping[str, SparsePoly]) -> Dict[str, int]:
    """Per-variable degree bound over a set of numerators (Schwartz-Zippel bookkeeping)."""
    return {v: max((p.degree(v) for p in nums.values()), default=0) for v in VARS}
