import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carterlab.errors import DimensionMismatch, InputError, WrongMode
from carterlab.slab_evolution import (MidpointStepper, coercivity_eigenvalue, default_dt, energy_and_average,
                                      init_state, run_boundedness_experiment, stability_constants,
                                      step_midpoint, threshold_decompose)
from carterlab.slab_spectral import assemble_operators, build_slab, solve_spectrum, weighted_mean
from conftest import KERR_SLAB

_OPS = {}


def ops_for(m, n=11):
    from carterlab.metric import CarterParams, build_coefficients

    key = (m, n)
    if key not in _OPS:
        c = build_coefficients(CarterParams(M=1, a=0.5))
        _OPS[key] = assemble_operators(build_slab(c, KERR_SLAB, n, m=m))
    return _OPS[key]


@pytest.mark.parametrize("m", [0, 1, 2])
def test_energy_conserved(m):
    ops = ops_for(m)
    rng = np.random.default_rng(m)
    st0 = init_state(ops, rng.standard_normal(ops.n), rng.standard_normal(ops.n))
    E0 = energy_and_average(st0).E
    stepper = MidpointStepper(ops, default_dt(ops))
    s = st0
    for _ in range(300):
        s = stepper.step(s)
    assert abs(energy_and_average(s).E - E0) / E0 < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 10.0), st.sampled_from([0, 1]))
def test_energy_conserved_any_dt(seed, dt, m):
    ops = ops_for(m, 7)
    rng = np.random.default_rng(seed)
    s = init_state(ops, rng.standard_normal(ops.n), rng.standard_normal(ops.n))
    E0 = energy_and_average(s).E
    for _ in range(10):
        s = step_midpoint(s, dt)
    assert abs(energy_and_average(s).E - E0) / E0 < 1e-11


@pytest.mark.parametrize("m", [0, 1])
def test_time_reversible(m):
    ops = ops_for(m)
    rng = np.random.default_rng(5)
    s0 = init_state(ops, rng.standard_normal(ops.n), rng.standard_normal(ops.n))
    dt = default_dt(ops)
    s1 = step_midpoint(step_midpoint(s0, dt), -dt)
    assert np.max(np.abs(s1.u - s0.u)) < 1e-12 * max(1, np.max(np.abs(s0.u)))
    assert np.max(np.abs(s1.ut - s0.ut)) < 1e-12 * max(1, np.max(np.abs(s0.ut)))


def test_eigenmode_period_second_order():
    # spectral-propagator oracle: u(t) = cos(sqrt(lambda_1) t) psi_1 exactly for the semi-discrete system
    ops = ops_for(0)
    spec = solve_spectrum(ops, 2)
    psi, w = spec.vectors[:, 1], math.sqrt(spec.lambda1)
    T = 2 * math.pi / w
    errs = []
    for n in (40, 80, 160):
        s = init_state(ops, psi, np.zeros(ops.n))
        st_ = MidpointStepper(ops, T / n)
        for _ in range(n):
            s = st_.step(s)
        # u sits at a cosine peak after one period, so the phase error shows in u_t
        errs.append(np.max(np.abs(s.ut)) / (w * np.max(np.abs(psi))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2) < 0.1)


def test_threshold_data_affine_exact():
    ops = ops_for(0)
    s = init_state(ops, np.ones(ops.n), np.ones(ops.n))
    dt = 0.37
    for k in range(1, 51):
        s = step_midpoint(s, dt)
    assert np.max(np.abs(s.u - (1 + 50 * dt))) < 1e-11
    assert np.max(np.abs(s.ut - 1)) < 1e-12


def test_threshold_decompose():
    ops = ops_for(0)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(ops.n)
    v -= weighted_mean(ops, v)
    c0, c1, rest = threshold_decompose(init_state(ops, 2 + v, -1 + 0 * v))
    assert c0 == pytest.approx(2) and c1 == pytest.approx(-1)
    assert abs(weighted_mean(ops, rest.u)) < 1e-13
    with pytest.raises(WrongMode):
        threshold_decompose(init_state(ops_for(1), v, v))


def test_affine_law_for_generic_data():
    ops = ops_for(0)
    rng = np.random.default_rng(9)
    ts = run_boundedness_experiment(ops, (rng.standard_normal(ops.n) + 3, rng.standard_normal(ops.n) - 1), T=5.0)
    assert ts.affine_defect < 1e-12
    assert ts.energy_drift < 1e-12


def test_boundedness_random_mean_zero():
    ops = ops_for(0)
    rng = np.random.default_rng(4)
    u0, u1 = rng.standard_normal(ops.n), rng.standard_normal(ops.n)
    u0 -= weighted_mean(ops, u0)
    u1 -= weighted_mean(ops, u1)
    ts = run_boundedness_experiment(ops, (u0, u1), T=20.0)
    assert ts.bound_ok
    assert ts.sup_ratio_weighted <= ts.weighted_bound


def test_threshold_growth_and_zero_v():
    ops = ops_for(0)
    ts = run_boundedness_experiment(ops, (np.ones(ops.n), np.ones(ops.n)), T=10.0)
    assert np.max(ts.norm_v) < 1e-10
    # ||u|| grows linearly: ratio to (1 + t) is constant
    ratio = ts.norm_u / (1 + ts.t)
    assert np.ptp(ratio) < 1e-10 * ratio[0]


def test_eigenmode_no_decay():
    ops = ops_for(0)
    psi = solve_spectrum(ops, 2).vectors[:, 1]
    ts = run_boundedness_experiment(ops, (psi, np.zeros(ops.n)), T=30.0)
    assert ts.late_energy_ratio >= 0.99


def test_stability_constants_consistent():
    ops = ops_for(1)
    lam = coercivity_eigenvalue(ops)
    sc = stability_constants(ops, lam)
    assert sc.c_low > 0 and sc.C_high >= sc.c_low and sc.C_stab >= 1


def test_bad_inputs():
    ops = ops_for(0)
    with pytest.raises(DimensionMismatch):
        init_state(ops, np.ones(3), np.ones(3))
    with pytest.raises(InputError):
        MidpointStepper(ops, 0.0)
    with pytest.raises(InputError):
        run_boundedness_experiment(ops, (np.ones(ops.n), np.ones(ops.n)), T=-1.0)
