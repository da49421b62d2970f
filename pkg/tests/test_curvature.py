import random
import time
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from carterlab.curvature import (SymbolicCarter, christoffel_table, curvature, defect_residuals_at_point,
                                 flip_gtphi_term, metric_tables, ricci_defect_numerators, spot_check_point,
                                 spot_check_random, trace_free_check, verify_certificates)
from carterlab.errors import CertificateFailure, EvaluationAtPole
from carterlab.jets import Jet
from carterlab.poly import RatFun, SparsePoly
from oracles import sympy_mixed_ricci

PINNED = dict(a=F(1, 2), M=1, C3=F(1, 3), C4=F(1, 5), C5=F(-1, 7), Lambda=F(1, 11), C1=F(1, 4),
              C2=F(-1, 3), k=0)
POINT = (F(7, 2), F(1, 3))

# sympy oracle output at PINNED, POINT (coordinates t, r, x, phi), frozen
FROZEN_MIXED = {
    (0, 0): F(-191673, 75557027), (0, 3): F(167400, 75557027), (1, 1): F(-837, 341887),
    (2, 2): F(837, 341887), (3, 0): F(-15066, 75557027), (3, 3): F(191673, 75557027),
}


@pytest.fixture(scope="module")
def pinned_data():
    return curvature(SymbolicCarter(subs=PINNED))


def test_mixed_ricci_matches_frozen_oracle(pinned_data):
    pt = {"r": POINT[0], "x": POINT[1]}
    for i in range(4):
        for j in range(4):
            got = F(pinned_data.mixed[(i, j)].evaluate(pt)) if (i, j) in pinned_data.mixed else F(0)
            assert got == FROZEN_MIXED.get((i, j), F(0)), (i, j)


def test_mixed_ricci_matches_live_sympy_oracle():
    params = dict(a=F(1, 3), M=F(3, 2), C3=F(1, 5), C1=F(-1, 6), C4=F(1, 9))
    pt = (F(5, 2), F(-2, 7))
    ref = sympy_mixed_ricci(params, *pt)
    data = curvature(SymbolicCarter(subs={**params, "k": 0, "Lambda": 0, "C2": 0, "C5": 0}))
    for i in range(4):
        for j in range(4):
            got = data.mixed[(i, j)].evaluate({"r": pt[0], "x": pt[1]}) if (i, j) in data.mixed else 0
            assert F(got) == F(str(ref[i, j])), (i, j)


def test_kn_defect_components_are_q_squared_over_rho4():
    # KN as a Carter member: delta = Q^2, S^r_r = -Q^2/rho^4, S^x_x = +Q^2/rho^4
    Q2, a, r, x = F(9, 100), F(1, 2), F(3), F(1, 4)
    ref = sympy_mixed_ricci(dict(a=a, M=1, C3=Q2), r, x)
    rho4 = (r * r + a * a * x * x) ** 2
    assert F(str(ref[1, 1])) == -Q2 / rho4
    assert F(str(ref[2, 2])) == Q2 / rho4
    assert F(str(ref[0, 0] + ref[1, 1] + ref[2, 2] + ref[3, 3])) == 0


def test_pinned_certificate_passes(pinned_data):
    nums = ricci_defect_numerators(data=pinned_data)
    assert all(p.is_zero() for p in nums.values())
    assert trace_free_check(pinned_data).is_zero()


def test_pinned_k_nonzero_scalar_curvature():
    # with k != 0 the scalar certificate still closes (R = k)
    vals = spot_check_point({**PINNED, "k": F(2, 3)}, F(5, 2), F(1, 5))
    assert all(v == 0 for v in vals.values())


def test_mutation_fails_pinned_certificate():
    bg = SymbolicCarter(subs={**PINNED, "k": F(1, 2)})
    with pytest.raises(CertificateFailure) as err:
        verify_certificates(bg, mutation=flip_gtphi_term)
    assert err.value.component
    rep = verify_certificates(bg, mutation=flip_gtphi_term, raise_on_failure=False)
    assert not rep.passed


def test_spot_check_fast_and_passes():
    t0 = time.perf_counter()
    assert spot_check_random(50, seed=0)
    assert time.perf_counter() - t0 <= 10.0


def test_spot_check_detects_fault():
    assert not spot_check_random(5, seed=1, mutation=flip_gtphi_term)


def test_spot_check_reproducible():
    assert spot_check_random(3, seed=7) == spot_check_random(3, seed=7)


def test_evaluation_at_pole():
    with pytest.raises(EvaluationAtPole):
        defect_residuals_at_point({**PINNED, "C3": 0, "a": 0, "C5": 0}, 0, 0)


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.fractions(min_value=-4, max_value=4, max_denominator=6), min_size=11, max_size=11))
def test_jet_residuals_vanish_at_random_points(vals):
    keys = ("a", "k", "Lambda", "M", "C1", "C2", "C3", "C4", "C5")
    params = dict(zip(keys, vals[:9]))
    try:
        res = defect_residuals_at_point(params, vals[9], vals[10])
    except EvaluationAtPole:
        return
    assert all(v == 0 for v in res.values())


def test_jet_arithmetic_against_sympy():
    r, x = SparsePoly.var("r"), SparsePoly.var("x")
    p = r * r * x + SparsePoly.const(3) * x - r
    q = SparsePoly.const(2) + r * x
    r0, x0 = F(1, 2), F(-1, 3)
    j = Jet.from_poly(p, r0, x0, 2) / Jet.from_poly(q, r0, x0, 2)
    rs, xs = sp.symbols("r x")
    f = (rs**2 * xs + 3 * xs - rs) / (2 + rs * xs)
    at = {rs: sp.Rational(1, 2), xs: sp.Rational(-1, 3)}
    assert F(str(f.subs(at))) == F(j.value())
    assert F(str(sp.diff(f, rs).subs(at))) == F(j.diff("r").value())
    assert F(str(sp.diff(f, rs, xs).subs(at))) == F(j.diff("r").diff("x").value())


# Christoffel symbols and quotient rule ---------------------------------------

def _metric_float(p, r, x):
    """Covariant metric (t, r, x, phi) in floating point, written out independently."""
    a, M = p["a"], p["M"]
    a2 = a * a
    al2 = 1 - p["Lambda"] * a2 / 3 + p["C1"] / 2
    dr = al2 * r * r + (p["C2"] - 2 * M) * r + a2 + p["C3"]
    dx = -al2 * x * x - p["C4"] * x + 1 + p["C5"]
    rho2 = r * r + a2 * x * x
    g = np.zeros((4, 4))
    g[0, 0] = (a2 * dx - dr) / rho2
    g[0, 3] = g[3, 0] = (a * (1 - x * x) * dr - a * (r * r + a2) * dx) / rho2
    g[3, 3] = ((r * r + a2) ** 2 * dx - a2 * (1 - x * x) ** 2 * dr) / rho2
    g[1, 1] = rho2 / dr
    g[2, 2] = rho2 / dx
    return g


def _christoffel_fd(p, r, x, h=1e-5):
    dg = np.zeros((4, 4, 4))  # dg[c] = d_c g
    dg[1] = (_metric_float(p, r + h, x) - _metric_float(p, r - h, x)) / (2 * h)
    dg[2] = (_metric_float(p, r, x + h) - _metric_float(p, r, x - h)) / (2 * h)
    gi = np.linalg.inv(_metric_float(p, r, x))
    low = 0.5 * (np.einsum("man->amn", dg) + np.einsum("nam->amn", dg) - dg)
    return np.einsum("la,amn->lmn", gi, low)


@pytest.mark.parametrize("params", [
    dict(a=0, M=1, Lambda=0, C1=0, C2=0, C3=0, C4=0, C5=0),
    dict(a=F(1, 2), M=1, Lambda=F(1, 11), C1=F(1, 4), C2=F(-1, 3), C3=F(1, 3), C4=F(1, 5), C5=F(-1, 7)),
])
def test_christoffel_against_finite_differences(params):
    gamma, *_ = christoffel_table(SymbolicCarter(subs={**params, "k": 0}))
    pf = {k: float(v) for k, v in params.items()}
    rng = random.Random(11)
    for _ in range(5):
        r, x = F(rng.randint(25, 60), 8), F(rng.randint(-6, 6), 9)
        ref = _christoffel_fd(pf, float(r), float(x))
        scale = np.max(np.abs(ref))
        for (l, m, n), f in gamma.items():
            got = float(f.evaluate({"r": r, "x": x}))
            assert abs(got - ref[l, m, n]) < 1e-7 * scale, (l, m, n)


def test_christoffel_structure():
    gamma, *_ = christoffel_table()
    assert len({tuple(sorted(k[1:])) + (k[0],) for k in gamma}) == 40
    for (l, m, n), f in gamma.items():
        assert f.num == gamma[(l, n, m)].num and f.den_pows == gamma[(l, n, m)].den_pows
    # (t, phi) x (r, x) block diagonality kills Gamma^t_{rx}, Gamma^r_{t r}, ...
    tphi, rx = (0, 3), (1, 2)
    for l in tphi:
        for m in rx:
            for n in rx:
                assert gamma[(l, m, n)].is_zero()
    for l in rx:
        for m in tphi:
            for n in rx:
                assert gamma[(l, m, n)].is_zero()


def test_quotient_rule_examples():
    bg = SymbolicCarter()
    _, _, basis = metric_tables(bg)
    inv_dr = RatFun(SparsePoly.const(1), (0, 1, 0), basis)
    d = inv_dr.diff("r")
    assert d.den_pows == (0, 2, 0) and d.num == -bg.delta_r.diff("r")
    assert inv_dr.diff("x").is_zero()
    d = RatFun(bg.rho2, (0, 0, 0), basis).diff("r")
    assert d.den_pows == (0, 0, 0) and d.num == SparsePoly.var("r").scale(2)
