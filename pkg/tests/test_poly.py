from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from carterlab.poly import DenominatorBasis, RatFun, SparsePoly, poly_sum

small = st.fractions(min_value=-5, max_value=5, max_denominator=7)
names = st.sampled_from(["r", "x", "a", "M", "C3"])


@st.composite
def polys(draw, max_terms=5):
    p = SparsePoly.const(draw(small))
    for _ in range(draw(st.integers(0, max_terms))):
        term = SparsePoly.const(draw(small))
        for _ in range(draw(st.integers(0, 3))):
            term = term * SparsePoly.var(draw(names))
        p = p + term
    return p


def to_sympy(p: SparsePoly):
    syms = {n: sp.Symbol(n) for n in ("r", "x", "a", "M", "C3")}
    out = 0
    for mono, c in p.items():
        term = sp.Rational(int(c.numerator), int(c.denominator))
        for n, e in mono.items():
            term *= syms[n] ** e
        out += term
    return sp.expand(out)


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(p, q, s):
    assert (p + q) - (q + p) == SparsePoly()
    assert ((p * q) * s - p * (q * s)).is_zero()
    assert (p * (q + s) - (p * q + p * s)).is_zero()
    assert (p - p).is_zero()


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_product_rule(p, q):
    assert ((p * q).diff("r") - (p.diff("r") * q + p * q.diff("r"))).is_zero()


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_matches_sympy_expansion(p, q):
    assert sp.expand(to_sympy(p * q) - to_sympy(p) * to_sympy(q)) == 0


def test_evaluate_and_subs_exact():
    r, x = SparsePoly.var("r"), SparsePoly.var("x")
    p = r * r - SparsePoly.const(Fraction(1, 3)) * r * x + SparsePoly.const(2)
    assert p.evaluate({"r": Fraction(1, 2), "x": 3}) == Fraction(1, 4) - Fraction(1, 2) + 2
    q = p.subs({"x": 3})
    assert q.degree("x") == 0
    assert q.evaluate({"r": Fraction(1, 2)}) == p.evaluate({"r": Fraction(1, 2), "x": 3})


def test_pow_and_sum():
    r = SparsePoly.var("r")
    one = SparsePoly.const(1)
    assert ((r + one) ** 3 - (r * r * r + SparsePoly.const(3) * r * r + SparsePoly.const(3) * r + one)).is_zero()
    assert (poly_sum([r, r, -r]) - r).is_zero()


def test_ratfun_derivative_quotient_rule():
    r, x, a = (SparsePoly.var(n) for n in ("r", "x", "a"))
    rho2 = r * r + a * a * x * x
    dr = r * r - SparsePoly.const(2) * r + a * a
    dx = SparsePoly.const(1) - x * x
    basis = DenominatorBasis(rho2, dr, dx)
    f = RatFun(r * x, (1, 1, 0), basis)
    df = f.diff("r")
    pt = {"r": Fraction(3), "x": Fraction(1, 3), "a": Fraction(1, 2)}
    rs, xs, as_ = sp.symbols("r x a")
    expr = rs * xs / ((rs**2 + as_**2 * xs**2) * (rs**2 - 2 * rs + as_**2))
    ref = sp.diff(expr, rs).subs({rs: 3, xs: sp.Rational(1, 3), as_: sp.Rational(1, 2)})
    assert Fraction(str(ref)) == Fraction(df.evaluate(pt))
