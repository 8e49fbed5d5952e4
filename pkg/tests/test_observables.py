from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from endomra.observables import CylinderFunction, TrigPoly

coeffs = st.dictionaries(st.integers(-4, 4), st.fractions(-5, 5, max_denominator=8), max_size=5)


def test_cylinder_table_defaults_and_refine(gm):
    f = CylinderFunction(gm, 2, {(0, 1): Fraction(3)})
    assert f.at_word((0, 0)) == 0
    g = f.refine(4)
    for w in gm.words(4):
        assert g.at_word(w) == f.at_word(w[:2])


def test_cylinder_rejects_inadmissible(gm):
    with pytest.raises(ValueError):
        CylinderFunction(gm, 2, {(1, 1): 1})


def test_compose_r(gm):
    f = CylinderFunction.indicator(gm, (1,))
    g = f.compose_r(2)
    for w in gm.words(3):
        assert g.at_word(w) == (1 if w[2] == 1 else 0)


@given(coeffs, coeffs)
@settings(max_examples=60)
def test_trig_product_matches_pointwise(a, b):
    p, q = TrigPoly(a), TrigPoly(b)
    xs = np.linspace(0, 1, 17)
    assert np.allclose((p * q).evaluate(xs), p.evaluate(xs) * q.evaluate(xs))


@given(coeffs)
@settings(max_examples=60)
def test_downsample_is_fiber_average(a):
    p = TrigPoly(a)
    xs = np.linspace(0, 1, 13, endpoint=False)
    avg = (p.evaluate(xs / 2) + p.evaluate((xs + 1) / 2)) / 2
    assert np.allclose(p.downsample(2).evaluate(xs), avg)


def test_compose_power_and_abs2():
    m0 = TrigPoly({0: 1 / sp.sqrt(2), 1: 1 / sp.sqrt(2)})
    w = m0.abs2()
    assert w.coefficient(0) == 1 and w.coefficient(1) == Fraction(1, 2)
    assert TrigPoly({1: 1}).compose_power(3).equals(TrigPoly({3: 1}))
