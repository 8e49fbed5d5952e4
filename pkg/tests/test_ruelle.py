import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from endomra.observables import CylinderFunction, TrigPoly
from endomra.ruelle import (
    Filter,
    QMFViolation,
    apply_ruelle,
    averaging_decay,
    birkhoff_log_mean,
    conditional_expectation,
    find_w_cycles,
    generic_point,
    harmonic_space,
    low_pass_residual,
    lyapunov_A,
    pf_residual,
    qmf_residual,
    ruelle_at,
    transfer_matrix,
    uniform_weight,
    weight_from_filter,
)


def haar_A_quadrature() -> float:
    """``int_0^1 ln|sqrt(2) cos(pi x)| dx`` by adaptive quadrature split at the log singularity."""
    val, _ = sci_integrate.quad(lambda x: math.log(abs(math.sqrt(2) * math.cos(math.pi * x))), 0, 1, points=[0.5], limit=200)
    return val


def test_qmf_examples(gm, gm_rho, t2, gm_filter, haar_f):
    assert qmf_residual(gm, gm_rho, gm_filter) == 0
    assert qmf_residual(t2, None, haar_f) == 0
    for m0, want in [(TrigPoly({0: 1}), 0), (TrigPoly({1: 1}), 0), (TrigPoly({0: 2}), 3)]:
        assert qmf_residual(t2, None, Filter(m0)) == want


def test_low_pass_examples(gm, t2, gm_filter, haar_f, gm_cycle, zero_cycle, third_cycle):
    assert low_pass_residual(gm, gm_filter, gm_cycle) == 0
    assert low_pass_residual(t2, haar_f, zero_cycle) == 0
    assert float(low_pass_residual(t2, haar_f, third_cycle)) > 0.4


def test_weights(gm, t2, gm_filter, haar_f):
    W = weight_from_filter(gm, gm_filter)
    for w, v in W.items():
        assert v == (0 if w[:2] == (1, 0) else 1)
    Wh = weight_from_filter(t2, haar_f)
    xs = np.linspace(0, 1, 11)
    assert np.allclose(Wh.evaluate_real(xs), np.cos(np.pi * xs) ** 2)
    assert weight_from_filter(t2, Filter(TrigPoly({}))).is_zero()
    with pytest.raises(QMFViolation):
        weight_from_filter(t2, Filter(TrigPoly({0: 2})))


def test_apply_ruelle_examples(gm, t2, haar_f):
    R1 = apply_ruelle(gm, uniform_weight(gm), CylinderFunction.indicator(gm, (0,)))
    assert R1.at_word((0,)) == Fraction(1, 2) and R1.at_word((1,)) == 1
    W = weight_from_filter(t2, haar_f)
    assert apply_ruelle(t2, W, TrigPoly.constant(1)).equals(TrigPoly.constant(1))
    assert apply_ruelle(t2, W, TrigPoly({})).is_zero()


def test_matrix_matches_pointwise(gm, gm_filter):
    W = weight_from_filter(gm, gm_filter)
    for depth in range(2, 7):
        words, T = transfer_matrix(gm, W, depth)
        for j, v in enumerate(words):
            f = CylinderFunction.indicator(gm, v)
            Rf = apply_ruelle(gm, W, f)
            for i, u in enumerate(words):
                x = gm.cylinder_representative(u)
                assert T[i][j] == ruelle_at(gm, W, f, x) == Rf(x)


def test_harmonic_space(gm, t2, gm_filter, haar_f):
    W = weight_from_filter(gm, gm_filter)
    (h,) = harmonic_space(gm, W, 3)
    assert len(set(h.table.values())) == 1
    (hh,) = harmonic_space(t2, weight_from_filter(t2, haar_f), 8)
    assert hh.degree == 0
    assert harmonic_space(gm, CylinderFunction.constant(gm, 0).refine(2), 3) == []


def test_w_cycles(gm, t2, gm_filter, haar_f, cubic_filter):
    found = find_w_cycles(gm, weight_from_filter(gm, gm_filter), 3)
    assert [[gm.format_point(x) for x in c.points] for c in found] == [["(1)"]]
    assert [c.points for c in find_w_cycles(t2, weight_from_filter(t2, haar_f), 8)] == [(Fraction(0),)]
    got = {frozenset(c.points) for c in find_w_cycles(t2, weight_from_filter(t2, cubic_filter), 2)}
    assert got == {frozenset({Fraction(0)}), frozenset({Fraction(1, 3), Fraction(2, 3)})}


def test_w_cycles_complete_against_bruteforce(gm, gm_filter):
    W = weight_from_filter(gm, gm_filter)
    found = {frozenset(c.points) for c in find_w_cycles(gm, W, 6)}
    brute = {frozenset(c.points) for c in gm.enumerate_cycles(6) if all(W(x) == 1 for x in c.points)}
    assert found == brute


def test_conditional_expectation(gm, gm_rho):
    f = CylinderFunction.indicator(gm, (0,))
    assert conditional_expectation(gm, gm_rho, "uniform", f, 0) is f
    E1 = conditional_expectation(gm, gm_rho, "uniform", f, 1)
    for w in gm.words(2):
        assert E1.at_word(w) == Fraction(gm.adjacency[0][w[1]], gm.n_pre(w[1]))
    g = CylinderFunction.indicator(gm, (1,))
    E = conditional_expectation(gm, gm_rho, "uniform", g, 24)
    assert all(abs(float(v) - 1 / 3) < 1e-6 for v in E.table.values())


def test_conditional_expectation_is_projection(gm, gm_rho, rng):
    for _ in range(10):
        f = CylinderFunction.from_function(gm, 3, lambda w: Fraction(rng.randint(-5, 5), rng.randint(1, 5)))
        g = CylinderFunction.from_function(gm, 2, lambda w: Fraction(rng.randint(-5, 5), rng.randint(1, 5)))
        for n in (1, 2, 3):
            E = lambda h: conditional_expectation(gm, gm_rho, "uniform", h, n)
            assert E(E(f)).equals(E(f))
            gr = g.compose_r(n)
            assert E(f * gr).equals(gr * E(f))


def test_pf_duality(gm, gm_rho):
    for d in range(1, 6):
        for w in gm.words(d):
            assert pf_residual(gm_rho, "uniform", CylinderFunction.indicator(gm, w)) == 0


def test_r1_is_one_under_qmf(gm, gm_filter):
    W = weight_from_filter(gm, gm_filter)
    one = apply_ruelle(gm, W, CylinderFunction.constant(gm, 1))
    assert all(v == 1 for v in one.table.values())


def test_averaging_decay(gm, gm_rho, t2, haar):
    d = averaging_decay(gm, gm_rho, "uniform", CylinderFunction.indicator(gm, (0,)), 20)
    assert all(d[n + 1] / d[n] == Fraction(1, 2) for n in range(1, 20))
    assert all(v == 0 for v in averaging_decay(gm, gm_rho, "uniform", CylinderFunction.constant(gm, 5), 5))
    dz = averaging_decay(t2, haar, "uniform", TrigPoly({1: 1}), 3)
    assert dz[0] == pytest.approx(1.0) and dz[1:] == [0, 0, 0]


def test_haar_lyapunov_against_quadrature(t2, haar, haar_f):
    oracle = haar_A_quadrature()
    assert oracle == pytest.approx(-math.log(2) / 2, abs=1e-10)
    est = lyapunov_A(t2, haar, haar_f, 4000, seed=11, orbit_len=200)
    assert abs(est.value - oracle) < 3 * est.stderr + 1e-12
    assert est.hypothesis_ok and est.zero_mass == 0


def test_unimodular_filter_flags_hypothesis(t2, haar):
    est = lyapunov_A(t2, haar, Filter(TrigPoly({1: 1})), 10, seed=0, orbit_len=5)
    assert est.value == 0 and not est.hypothesis_ok


def test_golden_lyapunov_minus_infinity(gm, gm_rho, gm_filter):
    est = lyapunov_A(gm, gm_rho, gm_filter, 100, seed=0, orbit_len=50)
    assert est.value == -math.inf and est.zero_mass == Fraction(1, 3)
    assert birkhoff_log_mean(gm, gm_rho, gm_filter, gm.parse_point("1121(1)"), 5) == -math.inf
    assert birkhoff_log_mean(gm, gm_rho, gm_filter, gm.parse_point("(1)"), 5) == pytest.approx(math.log(2) / 2)


def test_birkhoff_haar(t2, haar, haar_f):
    x = generic_point(t2, haar, 12_000, seed=5)
    val = birkhoff_log_mean(t2, haar, haar_f, x, 10_000)
    assert abs(math.exp(val) - math.exp(-math.log(2) / 2)) < 1e-2
