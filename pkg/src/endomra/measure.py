"""Perron-Frobenius measures and exact integration.

For a subshift with a depth-``k`` weight ``V`` (``sum_{r(y)=x} V(y) = 1``) the
measure satisfying ``int R_V f dnu = int f dnu`` is determined by the masses
of words of length ``L = max(k - 1, 1)``:

    nu[u] = sum_a V(u a) nu[u_1 ... u_{L-1} a]        (|u| = L)
    nu[w] = V(w_0 ... w_{k-1}) nu[w_1 ...]             (|w| >= k)

The first line is a finite eigenproblem solved in exact arithmetic.  The
uniform weight ``1/#r^{-1}(r(y))`` gives the strongly invariant measure.
On the torus only the uniform weight is supported, where the answer is Haar.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .endo import DynamicalSystem, SftSystem, TorusSystem
from .exact import is_zero, magnitude, normalize, nullspace, to_float
from .observables import CylinderFunction, TrigPoly


class MeasureError(ValueError):
    """No unique normalized Perron-Frobenius measure for the given weight."""


class WeightError(ValueError):
    """Weight is negative or does not sum to 1 over preimage fibers."""


def uniform_weight_table(sys: DynamicalSystem) -> CylinderFunction:
    """``V(y) = 1/#r^{-1}(r(y))`` as a depth-2 cylinder function."""
    return CylinderFunction.from_function(sys, 2, lambda w: Fraction(1, sys.n_pre(w[1])))


def check_weight(sys: DynamicalSystem, V: CylinderFunction) -> None:
    """Raise :class:`WeightError` unless ``V >= 0`` and fiber sums equal 1."""
    if V.depth < 2:
        V = V.refine(2)
    for w, v in V.items():
        if isinstance(v, (Fraction, int)) and v < 0:
            raise WeightError(f"negative weight on {sys.alphabet.format_word(w)}")
        if to_float(abs(v) if isinstance(v, complex) else v) < 0:
            raise WeightError(f"negative weight on {sys.alphabet.format_word(w)}")
    for tail in sys.words(V.depth - 1):
        total = sum((V.table[(a,) + tail] for a in sys.predecessors(tail[0])), Fraction(0))
        if not is_zero(normalize(total - 1)):
            raise WeightError(
                f"weights over the fiber of [{sys.alphabet.format_word(tail)}] sum to {total}, not 1"
            )


@dataclass(frozen=True, eq=False)
class InvariantMeasure:
    """Markov measure (subshift) or Haar measure (torus).

    Attributes
    ----------
    sys : DynamicalSystem
    weight : CylinderFunction or None
        The weight ``V``; ``None`` means Haar on the torus.
    weight_tag : str
        ``"uniform"`` or ``"custom"``.
    state_mass : dict
        Exact masses of the words of length ``L`` (subshift only).
    """

    sys: Any
    weight: Any
    weight_tag: str
    state_mass: dict

    @property
    def kind(self) -> str:
        return "haar" if self.weight is None else "markov"

    @property
    def state_len(self) -> int:
        return self.weight.depth - 1 if self.weight is not None else 0

    @property
    def stationary(self) -> dict:
        """Masses of the one-letter cylinders."""
        return {w[0]: self.cylinder_mass(w) for w in self.sys.words(1)}

    def cylinder_mass(self, word) -> Any:
        word = tuple(word)
        if self.weight is None:
            return Fraction(1, self.sys.degree ** len(word))
        if not self.sys.is_word(word):
            return Fraction(0)
        L = self.state_len
        if len(word) == L:
            return self.state_mass[word]
        if len(word) < L:
            return normalize(
                sum((self.state_mass[w] for w in self.sys.words(L) if w[: len(word)] == word), Fraction(0))
            )
        mass = self.state_mass[word[-L:]]
        for i in range(len(word) - L - 1, -1, -1):
            mass = mass * self.weight.table[word[i : i + L + 1]]
        return normalize(mass)

    def backward_matrix(self):
        """Letter-level matrix ``M(j, w) = A(j, w)/N(w)`` for the uniform case."""
        if not isinstance(self.sys, SftSystem):
            raise TypeError("backward matrix is defined for subshifts")
        n = self.sys.n_letters
        return [[Fraction(self.sys.adjacency[j][w], self.sys.n_pre(w)) for w in range(n)] for j in range(n)]


def invariant_measure(sys: DynamicalSystem, V="uniform") -> InvariantMeasure:
    """Perron-Frobenius measure for ``V`` (``"uniform"`` or a :class:`CylinderFunction`).

    Raises
    ------
    WeightError
        ``V`` negative or not normalized over fibers.
    MeasureError
        Eigenspace for eigenvalue 1 is not one-dimensional or has no
        nonnegative normalized element.
    """
    if isinstance(sys, TorusSystem):
        if isinstance(V, str) and V == "uniform":
            return InvariantMeasure(sys, None, "uniform", {})
        if isinstance(V, TrigPoly) and V.equals(TrigPoly.constant(Fraction(1, sys.degree))):
            return InvariantMeasure(sys, None, "uniform", {})
        if isinstance(V, CylinderFunction) and all(v == Fraction(1, sys.degree) for v in V.table.values()):
            return InvariantMeasure(sys, None, "uniform", {})
        raise NotImplementedError("torus measures are supported for the uniform weight only")
    tag = "uniform"
    if isinstance(V, str):
        if V != "uniform":
            raise ValueError(f"unknown weight {V!r}")
        V = uniform_weight_table(sys)
    else:
        tag = "custom"
        if not isinstance(V, CylinderFunction):
            raise TypeError("subshift weights must be cylinder functions")
        if V.depth < 2:
            V = V.refine(2)
    check_weight(sys, V)
    L = V.depth - 1
    states = sys.words(L)
    index = {u: i for i, u in enumerate(states)}
    rows = []
    for u in states:
        row: list = [Fraction(0)] * len(states)
        row[index[u]] += 1
        for a in sys.extendable:
            if sys.admissible(u[-1], a):
                row[index[u[1:] + (a,)]] -= V.table[u + (a,)]
        rows.append(row)
    basis = nullspace(rows, len(states))
    if len(basis) != 1:
        raise MeasureError(
            f"eigenvalue-1 space has dimension {len(basis)}; the measure is not unique"
            if basis
            else "no invariant measure for this weight"
        )
    vec = basis[0]
    total = normalize(sum(vec, Fraction(0)))
    if is_zero(total):
        raise MeasureError("invariant vector has zero total mass")
    vec = [normalize(v / total) for v in vec]
    if any(to_float(v) < 0 for v in vec):
        raise MeasureError("invariant vector has mixed signs")
    return InvariantMeasure(sys, V, tag, dict(zip(states, vec)))


def cylinder_mass(measure: InvariantMeasure, word) -> Any:
    return measure.cylinder_mass(word)


def integrate(measure: InvariantMeasure, f) -> Any:
    """Exact integral of a cylinder function, trig polynomial or constant."""
    if isinstance(f, CylinderFunction):
        return normalize(sum((v * measure.cylinder_mass(w) for w, v in f.items()), Fraction(0)))
    if isinstance(f, TrigPoly):
        if measure.kind != "haar":
            raise TypeError("trigonometric polynomials integrate against Haar measure only")
        return f.coefficient(0)
    return normalize(f)


def fiber_average(sys: DynamicalSystem, f):
    """``x -> (1/#r^{-1}(x)) sum_{r(y)=x} f(y)`` in the class of ``f``."""
    if isinstance(f, TrigPoly):
        return f.downsample(sys.degree)
    if f.depth < 2:
        f = f.refine(2)
    return CylinderFunction.from_function(
        sys,
        f.depth - 1,
        lambda w: sum((f.table[(a,) + w] for a in sys.predecessors(w[0])), Fraction(0)) / sys.n_pre(w[0]),
    )


def strong_invariance_residual(measure: InvariantMeasure, f) -> Any:
    """``|int f drho - int (fiber average of f) drho|``, exact on cylinder and trig classes."""
    return magnitude(normalize(integrate(measure, f) - integrate(measure, fiber_average(measure.sys, f))))


# -- sampling ---------------------------------------------------------------


def _forward_tables(measure: InvariantMeasure):
    """Order-``L`` forward kernel ``P(a | u) = nu[u a] / nu[u]`` over state words."""
    sys = measure.sys
    L = measure.state_len
    states = sys.words(L)
    index = {u: i for i, u in enumerate(states)}
    n, q = len(states), sys.n_letters
    init = np.array([to_float(measure.state_mass[u]) for u in states])
    kernel = np.zeros((n, q))
    nxt = np.zeros((n, q), dtype=np.int64)
    for u in states:
        mu = measure.state_mass[u]
        for a in range(q):
            if not sys.admissible(u[-1], a) or a not in sys.extendable:
                continue
            nxt[index[u], a] = index[u[1:] + (a,)]
            if not is_zero(mu):
                kernel[index[u], a] = to_float(measure.cylinder_mass(u + (a,)) / mu)
    return states, init, kernel, nxt


def sample_points(measure: InvariantMeasure, n: int, seed: int, depth: int = 32) -> np.ndarray:
    """Draw ``n`` i.i.d. points from ``measure``.

    Subshift points are returned as an ``(n, depth)`` array of letter indices
    (their first ``depth`` letters); torus points as an array of floats.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if measure.kind == "haar":
        return rng.random(n)
    states, init, kernel, nxt = _forward_tables(measure)
    L = measure.state_len
    if depth < L:
        raise ValueError(f"depth must be at least {L}")
    out = np.empty((n, depth), dtype=np.int64)
    st = rng.choice(len(states), size=n, p=init / init.sum())
    state_words = np.array(states, dtype=np.int64)
    out[:, :L] = state_words[st]
    cum = np.cumsum(kernel, axis=1)
    cum /= np.where(cum[:, -1:] > 0, cum[:, -1:], 1.0)
    for t in range(L, depth):
        u = rng.random(n)
        a = (u[:, None] > cum[st]).sum(axis=1)
        a = np.minimum(a, kernel.shape[1] - 1)
        out[:, t] = a
        st = nxt[st, a]
    return out
