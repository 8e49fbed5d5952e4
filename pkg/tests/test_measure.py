from fractions import Fraction

import numpy as np
import pytest

from endomra.measure import (
    MeasureError,
    WeightError,
    integrate,
    invariant_measure,
    sample_points,
    strong_invariance_residual,
)
from endomra.observables import CylinderFunction, TrigPoly


def _letter_matrix_oracle():
    """Fixed point of ``M = [[1/2, 1], [1/2, 0]]`` by hand: ``pi = (2/3, 1/3)``."""
    M = [[Fraction(1, 2), Fraction(1)], [Fraction(1, 2), Fraction(0)]]
    pi = [Fraction(2, 3), Fraction(1, 3)]
    assert [sum(M[i][j] * pi[j] for j in range(2)) for i in range(2)] == pi
    return pi


def test_golden_masses(gm, gm_rho):
    pi = _letter_matrix_oracle()
    assert gm_rho.cylinder_mass((0,)) == pi[0]
    assert gm_rho.cylinder_mass((1,)) == pi[1]
    assert gm_rho.cylinder_mass((0, 0)) == Fraction(1, 3)
    assert gm_rho.cylinder_mass((1, 1)) == 0
    assert gm_rho.backward_matrix() == [[Fraction(1, 2), 1], [Fraction(1, 2), 0]]


def test_integrate_examples(gm, gm_rho, haar):
    assert integrate(gm_rho, CylinderFunction.indicator(gm, (1,))) == Fraction(1, 3)
    assert integrate(gm_rho, CylinderFunction.constant(gm, 1)) == 1
    assert integrate(haar, TrigPoly({0: 3, 2: 1})) == 3


def test_refinement_consistency(gm, gm_rho):
    for d in range(1, 7):
        for w in gm.words(d):
            ext = sum((gm_rho.cylinder_mass(w + (a,)) for a in range(2) if gm.admissible(w[-1], a)), Fraction(0))
            assert ext == gm_rho.cylinder_mass(w)


def test_r_invariance(gm, gm_rho):
    for d in range(1, 6):
        for w in gm.words(d):
            f = CylinderFunction.indicator(gm, w)
            assert integrate(gm_rho, f.compose_r(1)) == integrate(gm_rho, f)


def test_strong_invariance_zero(gm, gm_rho, haar):
    for d in range(1, 6):
        for w in gm.words(d):
            assert strong_invariance_residual(gm_rho, CylinderFunction.indicator(gm, w)) == 0
    for m in range(-6, 7):
        assert strong_invariance_residual(haar, TrigPoly({m: 1})) == 0
    assert strong_invariance_residual(gm_rho, CylinderFunction.constant(gm, 1)) == 0


def test_custom_weight_markov(gm):
    # V depth 2, V(11) = 1/3, V(21) = 2/3, V(12) = 1: pi solves pi1 = pi1/3 + pi2, pi2 = 2 pi1/3
    V = CylinderFunction(gm, 2, {(0, 0): Fraction(1, 3), (1, 0): Fraction(2, 3), (0, 1): Fraction(1)})
    nu = invariant_measure(gm, V)
    assert nu.cylinder_mass((0,)) == Fraction(3, 5)
    assert nu.cylinder_mass((1,)) == Fraction(2, 5)


def test_bad_weights(gm, t2):
    V = CylinderFunction(gm, 2, {(0, 0): Fraction(1, 3), (1, 0): Fraction(1, 3), (0, 1): Fraction(1)})
    with pytest.raises(WeightError):
        invariant_measure(gm, V)
    with pytest.raises(NotImplementedError):
        invariant_measure(t2, TrigPoly({0: Fraction(1, 2), 1: Fraction(1, 4)}))


def test_reducible_not_unique():
    from endomra.endo import Alphabet, SftSystem

    two_islands = SftSystem(Alphabet(("a", "b")), ((1, 0), (0, 1)))
    with pytest.raises(MeasureError):
        invariant_measure(two_islands)


def test_sampler_golden(gm_rho):
    x = sample_points(gm_rho, 100_000, seed=7, depth=4)
    p = np.mean(x[:, 0] == 0)
    se = np.sqrt(p * (1 - p) / len(x))
    assert abs(p - 2 / 3) < 4 * se
    p11 = np.mean((x[:, 0] == 0) & (x[:, 1] == 0))
    assert abs(p11 - 1 / 3) < 4 * np.sqrt(p11 * (1 - p11) / len(x))
    assert not np.any((x[:, :-1] == 1) & (x[:, 1:] == 1))


def test_sampler_torus_and_errors(haar):
    x = sample_points(haar, 100_000, seed=3)
    assert abs(x.mean() - 0.5) < 4 * x.std() / np.sqrt(len(x))
    with pytest.raises(ValueError):
        sample_points(haar, 0, seed=1)
    assert np.array_equal(sample_points(haar, 5, seed=9), sample_points(haar, 5, seed=9))


def test_open_cylinders_have_positive_mass(gm, gm_rho):
    for d in range(1, 7):
        for w in gm.words(d):
            assert gm_rho.cylinder_mass(w) > 0
