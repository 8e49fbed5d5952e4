from fractions import Fraction

import numpy as np
import pytest

from endomra import mra
from endomra.exact import abs2
from endomra.observables import CylinderFunction, TrigPoly
from endomra.ruelle import Filter, apply_ruelle, eval_exact, weight_from_filter
from endomra.solenoid import PathSpace, SolenoidPath, random_path


@pytest.fixture(scope="module")
def gspace(gm, gm_cycle, gm_filter):
    return mra.path_space(gm, gm_cycle, gm_filter)


def test_golden_scaling_values(gm, gm_cycle, gm_filter, gspace):
    for w in gm.words(3):
        x = gm.cylinder_representative(w)
        for path in gspace.enumerate_paths(x, 8):
            ev = mra.eval_scaling(gm, gm_cycle, gm_filter, path, gspace)
            want = 1 if all(a == 0 for a in path.prefix) else 0
            assert ev.exact and ev.tail_bound == 0 and ev.value == want


def test_haar_special_and_modulus(t2, zero_cycle, haar_f, rng):
    sp_ = mra.path_space(t2, zero_cycle, haar_f)
    ev = mra.eval_scaling(t2, zero_cycle, haar_f, sp_.special_path(0))
    assert ev.value == 1 and ev.exact
    for _ in range(30):
        ev = mra.eval_scaling(t2, zero_cycle, haar_f, random_path(sp_, rng))
        assert abs(ev.value) <= 1 + ev.tail_bound


def test_haar_scaling_closed_form(t2, zero_cycle, haar_f):
    # empty-prefix, 0-tail paths from x: phi = prod_k e^{i pi x/2^k} cos(pi x/2^k) = e^{i pi x} sinc(x)
    sp_ = mra.path_space(t2, zero_cycle, haar_f)
    for x in [Fraction(1, 3), Fraction(5, 8), Fraction(1, 10)]:
        ev = mra.eval_scaling(t2, zero_cycle, haar_f, SolenoidPath(x, (), 0, 0), sp_)
        xf = float(x)
        want = np.exp(1j * np.pi * xf) * np.sinc(xf)
        assert abs(ev.value - want) <= ev.tail_bound + 1e-14


def test_phi_squared_is_singleton_path_mass(gm, gm_cycle, gm_filter, gspace):
    W = weight_from_filter(gm, gm_filter)
    K = max(gm_filter.m0.depth, 2)
    for w in gm.words(3):
        x = gm.cylinder_representative(w)
        for path in gspace.enumerate_paths(x, 6):
            n = len(path.prefix) + K
            word = tuple(gspace.letter(path, k) for k in range(1, n + 1))
            phi = mra.eval_scaling(gm, gm_cycle, gm_filter, path, gspace).value
            assert abs2(phi) == gspace.path_cylinder_measure(W, x, word)


def test_low_pass_violation_refused(t2, third_cycle, haar_f):
    sp_ = PathSpace(t2, third_cycle)
    with pytest.raises(mra.FilterConditionError):
        mra.eval_scaling(t2, third_cycle, haar_f, sp_.make_path(Fraction(1, 3)))
    with pytest.raises(mra.FilterConditionError):
        mra.compute_h_c(t2, third_cycle, haar_f)


def test_qmf_violation_refused(gm, gm_cycle, gm_filter, gm_rho):
    bad = gm_filter.scaled(2)
    with pytest.raises(mra.FilterConditionError):
        mra.compute_h_c(gm, gm_cycle, bad)
    with pytest.raises(mra.FilterConditionError):
        mra.correlation_residual(gm, gm_rho, gm_cycle, bad, CylinderFunction.constant(gm, 1), 3)


def test_h_c_golden_both_routes(gm, gm_cycle, gm_filter):
    r = mra.compute_h_c(gm, gm_cycle, gm_filter, "both", m_max=8)
    assert r.exact and set(r.observable.table.values()) == {1}
    ps = mra.compute_h_c(gm, gm_cycle, gm_filter, "path_sum", m_max=8)
    assert ps.exact and ps.tail_bound == 0 and set(ps.observable.table.values()) == {1}


def test_h_c_haar(t2, zero_cycle, haar_f):
    r = mra.compute_h_c(t2, zero_cycle, haar_f, "both", m_max=10)
    assert r.observable.equals(TrigPoly.constant(1))
    gaps = []
    for M in (4, 8, 12):
        ps = mra.h_c_path_sum(t2, zero_cycle, haar_f, m_max=M)
        v, b = ps.at(Fraction(1, 3))
        assert v <= 1 + 1e-12 and 1 - v <= b + 1e-12
        gaps.append(1 - v)
    assert gaps[1] < gaps[0] / 8 and gaps[2] < gaps[1] / 8


def test_h_c_cubic_nonconstant(t2, third_cycle, zero_cycle, cubic_filter):
    h = mra.compute_h_c(t2, third_cycle, cubic_filter, "both", m_max=10).observable
    assert h.degree > 0
    assert eval_exact(h, Fraction(1, 3)) == 1 and eval_exact(h, Fraction(2, 3)) == 1
    assert eval_exact(h, Fraction(0)) == 0
    h0 = mra.compute_h_c(t2, zero_cycle, cubic_filter, "fixed_point").observable
    assert (h + h0).equals(TrigPoly.constant(1))


def test_h_c_harmonic_and_bounded(t2, third_cycle, cubic_filter):
    W = weight_from_filter(t2, cubic_filter)
    hc = mra.compute_h_c(t2, third_cycle, cubic_filter, "fixed_point").observable
    assert apply_ruelle(t2, W, hc).equals(hc)
    vals = hc.evaluate_real(np.linspace(0, 1, 4097))
    assert vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12


def test_golden_h_is_ruelle_fixed(gm, gm_filter):
    W = weight_from_filter(gm, gm_filter)
    h = mra.compute_h_c(gm, gm.enumerate_cycles(1)[0], gm_filter, "fixed_point").observable
    Rh = apply_ruelle(gm, W, h)
    for w in gm.words(h.depth):
        assert Rh(gm.cylinder_representative(w)) == h.at_word(w)


def test_correlation_golden(gm, gm_rho, gm_cycle, gm_filter):
    r = mra.correlation_residual(gm, gm_rho, gm_cycle, gm_filter, CylinderFunction.indicator(gm, (0,)), 6)
    assert r["lhs"] == r["rhs"] == Fraction(2, 3) and r["residual"] == 0
    r1 = mra.correlation_residual(gm, gm_rho, gm_cycle, gm_filter, CylinderFunction.constant(gm, 1), 6)
    assert r1["lhs"] == 1 and r1["residual"] == 0


def test_correlation_torus_cubic(t2, haar, third_cycle, cubic_filter):
    prev = None
    for M in (6, 10):
        r = mra.correlation_residual(t2, haar, third_cycle, cubic_filter, TrigPoly({1: 1}), M)
        assert r["rhs"] == Fraction(-2, 9)
        assert r["residual"] <= r["tail_bound"]
        if prev is not None:
            assert r["tail_bound"] < prev
        prev = r["tail_bound"]


def test_scaling_relation(gm, gm_cycle, gm_filter, gspace, t2, third_cycle, cubic_filter, rng):
    paths = [random_path(gspace, rng) for _ in range(50)]
    r = mra.scaling_relation_residual(gm, gm_cycle, gm_filter, paths)
    assert r["exact"] and r["residual"] == 0
    csp = mra.path_space(t2, third_cycle, cubic_filter)
    paths = [random_path(csp, rng) for _ in range(20)]
    r = mra.scaling_relation_residual(t2, third_cycle, cubic_filter, paths)
    assert r["residual"] <= 1e-10


def test_s0(gm, gm_rho, gm_filter, t2, haar, haar_f, rng):
    one = TrigPoly.constant(1)
    assert mra.s0_isometry_residual(t2, haar, haar_f, 1, one, one) == 0
    assert mra.s0_isometry_residual(gm, gm_rho, gm_filter, 1, CylinderFunction.constant(gm, 0), CylinderFunction.indicator(gm, (0,))) == 0
    f = CylinderFunction.indicator(gm, (1,))
    assert mra.s0_apply(gm, gm_filter, f).equals(gm_filter.m0 * f.compose_r(1))
    with pytest.raises(mra.HarmonicWeightError):
        mra.s0_isometry_residual(gm, gm_rho, gm_filter, CylinderFunction.indicator(gm, (0,)), f, f)


def test_purity(gm, gm_rho, gm_filter, t2, haar, haar_f):
    rep = mra.purity_decay(gm, gm_rho, gm_filter, 1, CylinderFunction.indicator(gm, (1, 0)), 8)
    assert rep.s == [0] * 8 and rep.method == "exact"
    rep = mra.purity_decay(t2, haar, haar_f, 1, TrigPoly.constant(1), 20)
    assert rep.decays and abs(rep.fitted_rate - 0.5) <= 0.15 * 0.5
    rep = mra.purity_decay(t2, haar, Filter(TrigPoly({1: 1})), 1, TrigPoly.constant(1), 5)
    assert not rep.hypothesis_ok and not rep.decays


def test_multiplicity(gm, gm_cycle, gm_filter, t2, third_cycle, cubic_filter):
    x1 = gm.parse_point("(1)")
    assert [mra.multiplicity(gm, gm_cycle, gm_filter, x1, n) for n in range(1, 5)] == [2, 3, 5, 8]
    assert mra.multiplicity(gm, gm_cycle, gm_filter, gm.parse_point("2(1)"), 1) == 1
    zero = CylinderFunction.constant(gm, 0)
    assert all(mra.multiplicity(gm, gm_cycle, gm_filter, x1, n, h=zero) == 0 for n in range(4))
    h = mra.compute_h_c(t2, third_cycle, cubic_filter, "fixed_point").observable
    for x in [Fraction(1, 3), Fraction(1, 5), Fraction(0)]:
        for n in range(3):
            d_next = mra.multiplicity(t2, third_cycle, cubic_filter, x, n + 1, h=h)
            assert d_next == sum(mra.multiplicity(t2, third_cycle, cubic_filter, y, n, h=h) for y in t2.preimages(x))


def test_multiplicity_uncertified_interval(t2, third_cycle, cubic_filter):
    h = mra.compute_h_c(t2, third_cycle, cubic_filter, "fixed_point").observable
    got = mra.multiplicity(t2, third_cycle, cubic_filter, 0.0, 1, h=h)
    # preimages 0.0 (h = 0 up to rounding) and 0.5
    assert got == (1, 2)
