from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from carterlab.errors import DegeneratePoint, StabilityRequiresK0
from carterlab.metric import (CarterParams, SlabSpec, build_coefficients, classify_slab, einstein_defect,
                              evaluate_blocks, kn_embed, to_float)

fr = st.fractions(min_value=-3, max_value=3, max_denominator=9)


@st.composite
def exact_params(draw):
    return CarterParams(M=draw(fr), a=draw(fr), Lambda=draw(fr), k=draw(fr), C1=draw(fr), C2=draw(fr),
                        C3=draw(fr), C4=draw(fr), C5=draw(fr), exact=True)


@settings(max_examples=80, deadline=None)
@given(exact_params(), st.fractions(min_value=-9, max_value=9, max_denominator=7),
       st.fractions(min_value=-1, max_value=1, max_denominator=11))
def test_block_determinant_identity_exact(p, r, x):
    c = build_coefficients(p)
    assume(c.delta_r(r) != 0 and c.delta_x(x) != 0 and c.rho2(r, x) != 0)
    b = evaluate_blocks(c, r, x)
    # g_tt g_phiphi - g_tphi^2 = -Delta_r Delta_x, exactly
    assert b.block_det_residual == 0
    # inverse (t, phi) block times covariant block is the identity
    one = b.rho2_gtt * b.g_tt + b.rho2_gtphi * b.g_tphi
    off = b.rho2_gtt * b.g_tphi + b.rho2_gtphi * b.g_phiphi
    assert one == b.rho2 and off == 0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3), st.floats(-0.9, 0.9), st.floats(0, 0.9))
def test_kn_embedding(M, a_frac, q_frac):
    a = a_frac * M
    Q = q_frac * M
    p = kn_embed(M, a, Q)
    c = build_coefficients(p)
    r = np.linspace(0.5, 5, 7)
    assert np.allclose(c.delta_r(r), r * r - 2 * M * r + a * a + Q * Q, rtol=1e-13, atol=1e-13)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(c.delta_x(x), 1 - x * x, atol=1e-15)
    assert einstein_defect(p) == pytest.approx(Q * Q)


def test_kn_exact_delta_is_q_squared():
    p = kn_embed(1, Fraction(1, 2), Fraction(3, 10), exact=True)
    assert p.delta == Fraction(9, 100)
    assert to_float(p).delta == pytest.approx(0.09)


def test_degenerate_point_raises():
    c = build_coefficients(CarterParams(M=1, a=0))
    with pytest.raises(DegeneratePoint):
        evaluate_blocks(c, 2.0, 1.0)  # Delta_x(1) = 0


def test_k_nonzero_rejected_for_stability():
    with pytest.raises(StabilityRequiresK0):
        CarterParams(k=1.0).require_k0()


def test_classify_kerr_slab(kerr):
    cls = classify_slab(kerr, SlabSpec(3, 5, -0.5, 0.5))
    assert cls.strict and cls.certified_margin > 0
    # slab reaching into the ergoregion near the horizon
    bad = classify_slab(kerr, SlabSpec(1.0, 5, -0.5, 0.5))
    assert bad.verdict == "REJECT" and bad.offending == "Delta_r"
    # through the equator near r = 2M the g_tt-type coefficient Phi or A fails
    ergo = classify_slab(kerr, SlabSpec(1.95, 2.05, -0.1, 0.1))
    assert ergo.verdict == "REJECT"


@settings(max_examples=30, deadline=None)
@given(st.floats(3.0, 4.5), st.floats(0.05, 0.5), st.floats(0.05, 0.45))
def test_sub_slab_of_strict_slab_is_strict(rm, width, xw):
    c = build_coefficients(CarterParams(M=1, a=0.5))
    outer = SlabSpec(3, 5, -0.5, 0.5)
    assert classify_slab(c, outer).strict
    inner = SlabSpec(rm, min(rm + width, 5.0), -xw, xw)
    assert classify_slab(c, inner).strict


def test_exact_and_float_modes_agree():
    pe = CarterParams(M=1, a=Fraction(1, 3), C1=Fraction(1, 5), C4=Fraction(-1, 7), exact=True)
    pf = to_float(pe)
    ce, cf = build_coefficients(pe), build_coefficients(pf)
    for r, x in ((3, Fraction(1, 4)), (Fraction(7, 2), Fraction(-1, 3))):
        be, bf = evaluate_blocks(ce, r, x), evaluate_blocks(cf, float(r), float(x))
        assert float(be.g_tphi) == pytest.approx(bf.g_tphi, rel=1e-14)
        assert float(be.rho2_gphiphi) == pytest.approx(bf.rho2_gphiphi, rel=1e-14)
