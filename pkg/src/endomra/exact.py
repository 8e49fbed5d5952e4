"""Exact scalar helpers.

Values flowing through the library are one of three kinds:

* ``int`` / ``fractions.Fraction`` -- exact rationals (the common case),
* sympy expressions -- exact algebraic numbers such as ``sqrt(2)`` that show
  up in filter tables,
* ``float`` / ``complex`` -- everything on the Monte Carlo or quadrature side.

The helpers here keep the exact kinds exact and collapse sympy results back to
``Fraction`` whenever they are rational.
"""

from __future__ import annotations

import cmath
import math
import re
from fractions import Fraction
from numbers import Number
from typing import Any, Sequence

import sympy as sp

_LITERAL_RE = re.compile(r"^[0-9a-zA-Z_+\-*/().\s^]*$")


def is_exact(v: Any) -> bool:
    return isinstance(v, (int, Fraction, sp.Basic)) and not isinstance(v, bool)


def normalize(v: Any) -> Any:
    """Return ``v`` with rational sympy values converted to ``Fraction``."""
    if isinstance(v, sp.Basic):
        if v.is_Rational:
            return Fraction(int(v.p), int(v.q))
        if v.is_number:
            re_, im_ = v.as_real_imag()
            if re_.is_Rational and im_ == 0:
                return Fraction(int(re_.p), int(re_.q))
            # products and sums of surds are not auto-simplified
            s = sp.expand(v)
            if not s.is_Rational and s.has(sp.Pow):
                s = sp.expand(sp.radsimp(s))
            if s.is_Rational:
                return Fraction(int(s.p), int(s.q))
            return s
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return Fraction(v)
    return v


def conj(v: Any) -> Any:
    if isinstance(v, sp.Basic):
        return normalize(sp.conjugate(v))
    if isinstance(v, complex):
        return v.conjugate()
    return v


def abs2(v: Any) -> Any:
    """|v|^2, exact for exact inputs."""
    if isinstance(v, sp.Basic):
        return normalize(sp.expand(v * sp.conjugate(v)))
    if isinstance(v, complex):
        return v.real * v.real + v.imag * v.imag
    return v * v


def is_zero(v: Any) -> bool:
    if isinstance(v, sp.Basic):
        w = sp.expand(v)
        if w == 0:
            return True
        if w.is_number and abs(complex(sp.N(w, 40))) > 1e-30:
            return False
        return bool(sp.simplify(w) == 0)
    return v == 0


def to_complex(v: Any) -> complex:
    if isinstance(v, sp.Basic):
        return complex(sp.N(v, 30))
    return complex(v)


def to_float(v: Any) -> float:
    if isinstance(v, sp.Basic):
        return float(sp.N(v, 30))
    return float(v)


def magnitude(v: Any) -> Any:
    """|v|: exact ``Fraction`` for rationals, float otherwise."""
    if isinstance(v, (int, Fraction)):
        return abs(Fraction(v))
    if isinstance(v, sp.Basic):
        m = normalize(sp.Abs(v))
        return m if isinstance(m, Fraction) else float(sp.N(m, 30))
    return abs(v)


def sqrt_exact(n: Any) -> Any:
    """Square root of a non-negative rational, exact."""
    n = Fraction(n)
    num, den = n.numerator, n.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return sp.sqrt(sp.Rational(num, den))


def exp_2pi_i(x: Fraction | float) -> complex:
    return cmath.exp(2j * math.pi * float(x))


def parse_exact(lit: Any) -> Any:
    """Parse an exact literal.

    Accepts ints, ``"p/q"`` strings, algebraic strings such as
    ``"1/sqrt(2)"`` and ``[re, im]`` pairs whose parts are literals.
    Floats are accepted but stay floats.
    """
    if isinstance(lit, bool):
        raise ValueError(f"not a number: {lit!r}")
    if isinstance(lit, (list, tuple)):
        if len(lit) != 2:
            raise ValueError(f"complex literal must be [re, im]: {lit!r}")
        re_, im_ = (parse_exact(p) for p in lit)
        if is_exact(re_) and is_exact(im_):
            if im_ == 0:
                return normalize(re_)
            return normalize(sp.sympify(re_) + sp.I * sp.sympify(im_))
        return complex(to_float(re_), to_float(im_))
    if isinstance(lit, int):
        return Fraction(lit)
    if isinstance(lit, float):
        return lit
    if isinstance(lit, Fraction):
        return lit
    if isinstance(lit, str):
        s = lit.strip()
        try:
            return Fraction(s)
        except ValueError:
            pass
        if not _LITERAL_RE.match(s):
            raise ValueError(f"bad numeric literal: {lit!r}")
        try:
            v = sp.sympify(s.replace("^", "**"), rational=True)
        except (sp.SympifyError, TypeError, SyntaxError) as exc:
            raise ValueError(f"bad numeric literal: {lit!r}") from exc
        if not v.is_number:
            raise ValueError(f"literal is not a number: {lit!r}")
        return normalize(v)
    if isinstance(lit, Number):
        return lit
    raise ValueError(f"bad numeric literal: {lit!r}")


def serialize(v: Any) -> Any:
    """Lossless JSON form: rationals as ``"p/q"``, surds as strings, complex as pairs."""
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, sp.Basic):
        v = normalize(v)
        if isinstance(v, Fraction):
            return serialize(v)
        re_, im_ = (normalize(p) for p in v.as_real_imag())
        if im_ == 0:
            return sp.sstr(v)
        return [serialize(re_), serialize(im_)]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float):
        return v
    return v


# -- exact linear algebra ---------------------------------------------------


def nullspace(rows: Sequence[Sequence[Any]], ncols: int) -> list[list[Any]]:
    """Basis of the right kernel of a matrix over an exact field.

    Gauss-Jordan elimination; entries may be ``Fraction`` or sympy numbers.
    Each basis vector has a 1 in its free column.
    """
    m = [[normalize(v) for v in row] for row in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if not is_zero(m[i][c])), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = normalize(1 / sp.sympify(m[r][c])) if isinstance(m[r][c], sp.Basic) else 1 / m[r][c]
        m[r] = [normalize(v * inv) for v in m[r]]
        for i in range(len(m)):
            if i != r and not is_zero(m[i][c]):
                f = m[i][c]
                m[i] = [normalize(a - f * b) for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v: list[Any] = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = normalize(-m[i][fc])
        basis.append(v)
    return basis


def solve(rows: Sequence[Sequence[Any]], rhs: Sequence[Any]) -> list[Any] | None:
    """Solve a consistent (possibly overdetermined) exact system; ``None`` if inconsistent
    or if the solution is not unique."""
    n = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    m = [[normalize(v) for v in row] for row in aug]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(m)) if not is_zero(m[i][c])), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [normalize(v / p) for v in m[r]]
        for i in range(len(m)):
            if i != r and not is_zero(m[i][c]):
                f = m[i][c]
                m[i] = [normalize(a - f * b) for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    if len(pivots) < n:
        return None
    if any(not is_zero(m[i][n]) for i in range(r, len(m))):
        return None
    return [m[i][n] for i in range(n)]
