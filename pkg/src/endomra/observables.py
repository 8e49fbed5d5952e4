"""Finitely described functions on ``X``.

:class:`CylinderFunction` depends on the first ``depth`` letters of a point
(works on both system classes; on the torus the letters are base-N digits).
:class:`TrigPoly` is a trigonometric polynomial ``sum_m c_m e^{2 pi i m x}``
on the torus.  Both keep exact coefficients exact.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Callable, Mapping

import numpy as np

from .endo import DynamicalSystem, TorusSystem
from .exact import abs2, conj, is_zero, magnitude, normalize, to_complex, to_float


class CylinderFunction:
    """Function of the first ``depth`` letters, stored as a full table."""

    __slots__ = ("sys", "depth", "table")

    def __init__(self, sys: DynamicalSystem, depth: int, table: Mapping | None = None):
        if depth < 1:
            raise ValueError("cylinder depth must be >= 1")
        self.sys = sys
        self.depth = depth
        words = sys.words(depth)
        table = dict(table or {})
        allowed = set(words)
        bad = [w for w in table if tuple(w) not in allowed]
        if bad:
            raise ValueError(f"table keyed by inadmissible words: {bad[:3]}")
        self.table = {w: normalize(table.get(w, Fraction(0))) for w in words}

    @classmethod
    def from_function(cls, sys, depth: int, fn: Callable) -> "CylinderFunction":
        return cls(sys, depth, {w: fn(w) for w in sys.words(depth)})

    @classmethod
    def constant(cls, sys, value=1) -> "CylinderFunction":
        return cls.from_function(sys, 1, lambda w: value)

    @classmethod
    def indicator(cls, sys, word) -> "CylinderFunction":
        word = tuple(word)
        if not sys.is_word(word):
            raise ValueError("indicator of an inadmissible word")
        return cls.from_function(sys, len(word), lambda w: Fraction(int(w == word)))

    def __call__(self, x) -> Any:
        return self.table[self.sys.first_letters(x, self.depth)]

    def at_word(self, w) -> Any:
        """Value on any word of length >= depth."""
        return self.table[tuple(w[: self.depth])]

    def refine(self, depth: int) -> "CylinderFunction":
        if depth < self.depth:
            raise ValueError("cannot refine to a smaller depth")
        if depth == self.depth:
            return self
        return CylinderFunction.from_function(self.sys, depth, self.at_word)

    def compose_r(self, n: int = 1) -> "CylinderFunction":
        """``f o r^n``."""
        return CylinderFunction.from_function(self.sys, self.depth + n, lambda w: self.at_word(w[n:]))

    def map(self, fn: Callable) -> "CylinderFunction":
        return CylinderFunction(self.sys, self.depth, {w: fn(v) for w, v in self.table.items()})

    def conj(self) -> "CylinderFunction":
        return self.map(conj)

    def abs2(self) -> "CylinderFunction":
        return self.map(abs2)

    def _binary(self, other, op) -> "CylinderFunction":
        if isinstance(other, CylinderFunction):
            if other.sys != self.sys:
                raise ValueError("observables live on different systems")
            d = max(self.depth, other.depth)
            return CylinderFunction.from_function(self.sys, d, lambda w: op(self.at_word(w), other.at_word(w)))
        if isinstance(other, TrigPoly):
            return NotImplemented
        return self.map(lambda v: op(v, other))

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self.map(lambda v: other - v)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.map(lambda v: v / other)

    def __neg__(self):
        return self.map(lambda v: -v)

    def is_zero(self) -> bool:
        return all(is_zero(v) for v in self.table.values())

    def equals(self, other) -> bool:
        return (self - other).is_zero()

    def sup_abs(self):
        return max(magnitude(v) for v in self.table.values())

    def items(self):
        return self.table.items()

    def __repr__(self):
        fmt = self.sys.alphabet.format_word
        body = ", ".join(f"{fmt(w)}: {v}" for w, v in self.table.items())
        return f"CylinderFunction(depth={self.depth}, {{{body}}})"


class TrigPoly:
    """Finite trigonometric polynomial on the circle ``[0, 1)``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[int, Any] | None = None):
        out = {}
        for m, c in (coeffs or {}).items():
            c = normalize(c)
            if not is_zero(c):
                out[int(m)] = c
        self.coeffs = dict(sorted(out.items()))

    @classmethod
    def constant(cls, value) -> "TrigPoly":
        return cls({0: value})

    @property
    def degree(self) -> int:
        return max((abs(m) for m in self.coeffs), default=0)

    def coefficient(self, m: int):
        return self.coeffs.get(m, Fraction(0))

    def __call__(self, x) -> complex:
        if isinstance(x, np.ndarray):
            return self.evaluate(x)
        return sum(
            (to_complex(c) * complex(math.cos(2 * math.pi * m * float(x)), math.sin(2 * math.pi * m * float(x)))
             for m, c in self.coeffs.items()),
            0j,
        )

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(x), dtype=complex)
        for m, c in self.coeffs.items():
            out += to_complex(c) * np.exp(2j * np.pi * m * x)
        return out

    def evaluate_real(self, x: np.ndarray) -> np.ndarray:
        """Evaluate a real-valued polynomial using cosines and sines only."""
        out = np.full(np.shape(x), to_complex(self.coefficient(0)).real)
        for m, c in self.coeffs.items():
            if m <= 0:
                continue
            c = to_complex(c)
            t = 2 * np.pi * m * x
            out += 2 * c.real * np.cos(t) - 2 * c.imag * np.sin(t)
        return out

    def __add__(self, other):
        if isinstance(other, TrigPoly):
            keys = set(self.coeffs) | set(other.coeffs)
            return TrigPoly({m: self.coefficient(m) + other.coefficient(m) for m in keys})
        if isinstance(other, CylinderFunction):
            return NotImplemented
        return self + TrigPoly.constant(other)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly({m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            out: dict = {}
            for m, a in self.coeffs.items():
                for n, b in other.coeffs.items():
                    out[m + n] = out.get(m + n, 0) + a * b
            return TrigPoly(out)
        if isinstance(other, CylinderFunction):
            return NotImplemented
        return TrigPoly({m: c * other for m, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return TrigPoly({m: c / other for m, c in self.coeffs.items()})

    def conj(self) -> "TrigPoly":
        return TrigPoly({-m: conj(c) for m, c in self.coeffs.items()})

    def abs2(self) -> "TrigPoly":
        return self * self.conj()

    def compose_power(self, k: int) -> "TrigPoly":
        """``f(z^k)``, i.e. ``f o r^n`` when ``k = N^n``."""
        return TrigPoly({m * k: c for m, c in self.coeffs.items()})

    def downsample(self, N: int) -> "TrigPoly":
        """``(1/N) sum_{N y = x} f(y)``."""
        return TrigPoly({m // N: c for m, c in self.coeffs.items() if m % N == 0})

    def is_zero(self) -> bool:
        return not self.coeffs

    def equals(self, other) -> bool:
        return (self - other).is_zero()

    def l1_norm(self) -> float:
        """Sum of coefficient moduli; an upper bound for the sup norm."""
        return sum(to_float(magnitude(c)) if not isinstance(c, complex) else abs(c) for c in self.coeffs.values())

    def lipschitz(self) -> float:
        """Bound on ``|f'|`` in the angle variable."""
        return 2 * math.pi * sum(abs(m) * abs(to_complex(c)) for m, c in self.coeffs.items())

    def is_exact(self) -> bool:
        return all(not isinstance(c, (float, complex)) for c in self.coeffs.values())

    def __repr__(self):
        return f"TrigPoly({self.coeffs})"


def torus_trig(sys, coeffs) -> TrigPoly:
    if not isinstance(sys, TorusSystem):
        raise TypeError("trigonometric polynomials live on the torus")
    return TrigPoly(coeffs)


def as_cylinder(sys, f) -> CylinderFunction:
    """Coerce a constant trig polynomial or scalar into a depth-1 cylinder function."""
    if isinstance(f, CylinderFunction):
        return f
    if isinstance(f, TrigPoly):
        if f.degree != 0:
            raise TypeError("only constant trigonometric polynomials are cylinder functions")
        return CylinderFunction.constant(sys, f.coefficient(0))
    return CylinderFunction.constant(sys, f)
