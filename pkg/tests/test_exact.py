from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from endomra.exact import abs2, is_zero, normalize, nullspace, parse_exact, serialize, solve, sqrt_exact

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=60)


def test_surd_products_collapse_to_rationals():
    r2 = sp.sqrt(2)
    assert normalize(r2 * r2) == Fraction(2)
    assert normalize((1 + r2) * (1 - r2)) == Fraction(-1)
    assert abs2(r2 / 2) == Fraction(1, 2)


def test_sqrt_exact():
    assert sqrt_exact(Fraction(9, 4)) == Fraction(3, 2)
    assert sqrt_exact(2) == sp.sqrt(2)


@pytest.mark.parametrize(
    "lit, want",
    [("3/4", Fraction(3, 4)), (5, Fraction(5)), ("1/sqrt(2)", sp.sqrt(2) / 2), (["1/2", "0"], Fraction(1, 2))],
)
def test_parse_exact(lit, want):
    assert is_zero(normalize(parse_exact(lit) - want))


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_exact("__import__('os')")
    with pytest.raises(ValueError):
        parse_exact(True)


@given(fractions)
def test_serialize_roundtrip_rationals(q):
    assert parse_exact(serialize(q)) == q


def test_serialize_complex_surd():
    v = parse_exact(["1/sqrt(2)", "1/sqrt(2)"])
    assert is_zero(normalize(parse_exact(serialize(v)) - v))


def test_nullspace_oracle():
    # kernel of [[1, 2, 3], [2, 4, 6]] is two-dimensional
    basis = nullspace([[1, 2, 3], [2, 4, 6]], 3)
    assert len(basis) == 2
    for b in basis:
        assert b[0] + 2 * b[1] + 3 * b[2] == 0


@given(fractions, fractions)
def test_solve_unique_and_inconsistent(a, b):
    sol = solve([[1, 1], [1, -1]], [a + b, a - b])
    assert sol == [a, b]
    assert solve([[1, 1], [1, 1]], [a, a + 1]) is None
