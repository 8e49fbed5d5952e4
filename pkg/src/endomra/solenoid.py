"""Backward paths converging to a cycle, and operators on path functionals.

A path ``omega = (z_1, z_2, ...)`` over ``z_0 = x`` with ``r(z_{k+1}) = z_k``
is built by prepending letters: ``z_k`` starts with letter ``j_k``.  For a
path in ``N_C(x)`` the letters are eventually the cycle's backward word, so
the path is encoded exactly by

* ``base``       -- the point ``x``;
* ``prefix``     -- ``j_1 ... j_m``, cut where the cycle continuation starts;
* ``alignment``  -- ``i`` with ``z_{kp} -> x_i``;
* ``tail``       -- which letter representation of the cycle is followed.

With ``tau_s`` the first letter of ``x_s`` (indices mod ``p``), the letters
past the prefix are ``j_n = tau_{i+n}``.  The encoding is canonical when
``j_m != tau_{i+m}``.  On the torus the cycle ``{0}`` has a second tail with
every letter ``N - 1``; its points approach ``1`` from below.

Shift conventions: ``rhat(x, omega) = (r(x), (x, z_1, ...))`` lowers the
alignment by one, ``rhat^{-1}`` raises it.

A :class:`PathFunctional` is a finite combination of indicators of
*patterns* ``(base word, prefix, alignment, tail)``: all paths whose base
lies in the cylinder of the base word and whose encoding has the given
prefix, alignment and tail.  Its ``lambda_C`` mass is the base cylinder mass.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable

from .endo import Cycle, DynamicalSystem, PointError, TorusSystem
from .exact import abs2, conj, is_zero, magnitude, normalize, sqrt_exact, to_float
from .measure import InvariantMeasure
from .observables import CylinderFunction


class SpecialPathError(ValueError):
    """The path lies on the orbit of the pure-cycle path and has no cross-section representative."""


class TailBoundUnavailable(ValueError):
    """An infinite path sum was requested without a certified tail bound."""


@dataclass(frozen=True)
class SolenoidPath:
    base: Any
    prefix: tuple
    alignment: int
    tail: int = 0


Key = tuple  # (base_word, prefix, alignment, tail)


class PathSpace:
    """``N_C`` for one system and cycle, with phases and cross-section depth.

    Parameters
    ----------
    sys, cycle
        The system and a cycle from ``sys.enumerate_cycles``.
    phases
        ``alpha_0 ... alpha_{p-1}``; default all 1.
    section_depth
        Cylinder depth ``d`` of the neighbourhood ``B`` of ``x_0`` used by
        the cross section; default ``2p``.
    """

    def __init__(self, sys: DynamicalSystem, cycle: Cycle, phases=None, section_depth: int | None = None):
        sys.validate_cycle(cycle)
        self.sys = sys
        self.cycle = cycle
        self.p = cycle.period
        self.phases = tuple(normalize(a) for a in phases) if phases else (Fraction(1),) * self.p
        if len(self.phases) != self.p:
            raise ValueError("need one phase per cycle point")
        self.d = section_depth if section_depth is not None else 2 * self.p
        if self.d < 2 * self.p:
            raise ValueError("section depth must be at least twice the period")
        self._tau = tuple(sys.first_letter(x) for x in cycle.points)
        self.n_tails = 1
        if isinstance(sys, TorusSystem) and self.p == 1 and cycle.points[0] == 0:
            self.n_tails = 2

    # -- letters ---------------------------------------------------------------

    def tail_letter(self, tail: int, s: int) -> int:
        if tail == 1:
            return self.sys.degree - 1
        return self._tau[s % self.p]

    def rep_letter(self, i: int, tail: int, l: int) -> int:
        """Letter ``l`` of ``x_i`` in the representation followed by ``tail``."""
        return self.tail_letter(tail, i - l)

    def alpha(self, i: int):
        return self.phases[i % self.p]

    def alpha_inv(self, i: int):
        return conj(self.phases[i % self.p])

    # -- concrete paths -------------------------------------------------------------

    def _canon_parts(self, prefix: tuple, i: int, tail: int) -> tuple:
        while prefix and prefix[-1] == self.tail_letter(tail, i + len(prefix)):
            prefix = prefix[:-1]
        return prefix

    def make_path(self, base, prefix=(), alignment: int = 0, tail: int = 0) -> SolenoidPath:
        """Validated canonical path."""
        sys = self.sys
        base = sys.validate(base)
        if not 0 <= tail < self.n_tails:
            raise ValueError("no such tail for this cycle")
        i = alignment % self.p
        prefix = tuple(prefix)
        self._check_chain(sys.first_letter(base), prefix, i, tail)
        return SolenoidPath(base, self._canon_parts(prefix, i, tail), i, tail)

    def _check_chain(self, first: int, prefix: tuple, i: int, tail: int) -> None:
        sys = self.sys
        prev = first
        for j in prefix:
            if not sys.admissible(j, prev):
                raise PointError("inadmissible prefix letter")
            prev = j
        if not sys.admissible(self.tail_letter(tail, i + len(prefix) + 1), prev):
            raise PointError("cycle tail cannot be prepended after the prefix")

    def letter(self, path: SolenoidPath, n: int) -> int:
        """``j_n``, the first letter of ``z_n`` (``n >= 1``)."""
        m = len(path.prefix)
        return path.prefix[n - 1] if n <= m else self.tail_letter(path.tail, path.alignment + n)

    def point(self, path: SolenoidPath, t: int):
        """``z_t``; negative ``t`` gives ``r^{|t|}(x)``."""
        z = path.base
        if t <= 0:
            for _ in range(-t):
                z = self.sys.apply(z)
            return z
        for n in range(1, t + 1):
            z = self.sys.prepend(self.letter(path, n), z)
        return z

    def is_special(self, path: SolenoidPath) -> bool:
        return (
            not path.prefix
            and path.tail == 0
            and path.base == self.cycle[path.alignment]
        )

    def special_path(self, i: int = 0) -> SolenoidPath:
        """``rhat^{-i}`` of the pure-cycle path, based at ``x_i``."""
        return SolenoidPath(self.cycle[i % self.p], (), i % self.p, 0)

    def r_hat(self, path: SolenoidPath) -> SolenoidPath:
        sys = self.sys
        a = sys.first_letter(path.base)
        i = (path.alignment - 1) % self.p
        prefix = self._canon_parts((a,) + path.prefix, i, path.tail)
        return SolenoidPath(sys.apply(path.base), prefix, i, path.tail)

    def r_hat_inv(self, path: SolenoidPath) -> SolenoidPath:
        j1 = self.letter(path, 1)
        base = self.sys.prepend(j1, path.base)
        return SolenoidPath(base, path.prefix[1:], (path.alignment + 1) % self.p, path.tail)

    def r_hat_power(self, path: SolenoidPath, k: int) -> SolenoidPath:
        for _ in range(abs(k)):
            path = self.r_hat(path) if k > 0 else self.r_hat_inv(path)
        return path

    def enumerate_paths(self, x, m_max: int) -> list:
        """Canonical elements of ``N_C(x)`` with prefix length at most ``m_max``.

        Ordered by prefix length, then prefix, alignment and tail.
        """
        if m_max < 0:
            raise ValueError("m_max must be >= 0")
        sys = self.sys
        x = sys.validate(x)
        x0 = sys.first_letter(x)
        out = []
        layer = [()]
        for m in range(m_max + 1):
            found = []
            for pre in layer:
                for tail in range(self.n_tails):
                    for i in range(self.p):
                        if pre and pre[-1] == self.tail_letter(tail, i + m):
                            continue
                        last = pre[-1] if pre else x0
                        if sys.admissible(self.tail_letter(tail, i + m + 1), last):
                            found.append(SolenoidPath(x, pre, i, tail))
            found.sort(key=lambda w: (w.prefix, w.alignment, w.tail))
            out.extend(found)
            layer = [
                pre + (a,) for pre in layer for a in sys.predecessors(pre[-1] if pre else x0)
            ]
        return out

    def path_cylinder_measure(self, W, x, word) -> Any:
        """``P_x`` of the paths starting with letters ``a_1 ... a_n``: ``prod W(z_k)``."""
        from .ruelle import eval_exact

        z = self.sys.validate(x)
        mass: Any = Fraction(1)
        for a in word:
            try:
                z = self.sys.prepend(a, z)
            except PointError as exc:
                raise PointError(f"inadmissible backward word: {exc}") from None
            mass = mass * eval_exact(W, z)
        return normalize(mass)

    # -- cross section ------------------------------------------------------------

    def in_B(self, z) -> bool:
        """``z`` is in the depth-``d`` cylinder neighbourhood of ``x_0``."""
        head = self.sys.first_letters(z, self.d)
        return any(
            head == tuple(self.rep_letter(0, t, l) for l in range(self.d)) for t in range(self.n_tails)
        )

    def section_index(self, path: SolenoidPath) -> int:
        """``k0`` with ``path = rhat^{k0}(eta)``, ``eta`` in the cross section, found by scanning points.

        Raises
        ------
        SpecialPathError
            If the path is on the orbit of the pure-cycle path.
        """
        p, i = self.p, path.alignment
        t = len(path.prefix) + self.d + p
        t -= (t + i) % p
        x0 = self.cycle[0]
        while True:
            z = self.point(path, t)
            if not self.in_B(z):
                return t
            if z == x0:
                raise SpecialPathError("no cross-section representative for a pure-cycle path")
            t -= p

    def canonicalize_path(self, path: SolenoidPath) -> tuple:
        """``(k, eta)`` with ``rhat^k(eta) = path`` and ``eta`` in the cross section."""
        k = self.section_index(path)
        return k, self.r_hat_power(path, -k)

    def in_cross_section(self, path: SolenoidPath) -> bool:
        try:
            return self.section_index(path) == 0
        except SpecialPathError:
            return False

    def section_index_formula(self, deviation: int, i: int) -> int:
        """Largest ``t = -i (mod p)`` with ``t <= deviation + d - 1``."""
        t = deviation + self.d - 1
        return t - (t + i) % self.p

    # -- patterns -----------------------------------------------------------------

    def canonical_key(self, key: Key) -> Key:
        w, pre, i, tail = key
        i %= self.p
        return (tuple(w), self._canon_parts(tuple(pre), i, tail), i, tail)

    def key_valid(self, key: Key) -> bool:
        w, pre, i, tail = key
        if not w or not self.sys.is_word(w):
            return False
        try:
            self._check_chain(w[0], tuple(pre), i, tail)
        except PointError:
            return False
        return True

    def pattern_letter(self, key: Key, t: int) -> int:
        """First letter of ``z_t`` on the pattern (base letters for ``t <= 0``)."""
        w, pre, i, tail = key
        if t <= 0:
            if -t >= len(w):
                raise ValueError("pattern base word too short")
            return w[-t]
        return pre[t - 1] if t <= len(pre) else self.tail_letter(tail, i + t)

    def fiber_product(self, key: Key, n: int) -> Any:
        """``c^{(n)}`` on the pattern, for either sign of ``n``."""
        n_pre = self.sys.n_pre
        if n >= 0:
            out = Fraction(1)
            for s in range(1, n + 1):
                out *= n_pre(self.pattern_letter(key, -s))
            return out
        den = 1
        for s in range(1, -n + 1):
            den *= n_pre(self.pattern_letter(key, s - 1))
        return Fraction(1, den)

    def key_r_hat(self, key: Key) -> Key:
        w, pre, i, tail = key
        if len(w) < 2:
            raise ValueError("refine the base word before shifting")
        return self.canonical_key((w[1:], (w[0],) + pre, i - 1, tail))

    def key_r_hat_inv(self, key: Key) -> Key:
        w, pre, i, tail = key
        j1 = pre[0] if pre else self.tail_letter(tail, i + 1)
        return ((j1,) + w, pre[1:], (i + 1) % self.p, tail)

    def key_deviation(self, key: Key) -> int | None:
        """Index of the first letter where the pattern leaves its cycle tail, if determined."""
        w, pre, i, tail = key
        if pre:
            return len(pre)
        for l, a in enumerate(w):
            if a != self.rep_letter(i, tail, l):
                return -l
        return None

    def key_section_index(self, key: Key) -> int | None:
        e = self.key_deviation(key)
        return None if e is None else self.section_index_formula(e, key[2])


class PathFunctional:
    """Finite linear combination of pattern indicators."""

    __slots__ = ("space", "terms")

    def __init__(self, space: PathSpace, terms: dict | None = None):
        self.space = space
        out: dict = {}
        for key, c in (terms or {}).items():
            key = space.canonical_key(key)
            if not space.key_valid(key):
                raise ValueError(f"invalid pattern {key}")
            v = normalize(out.get(key, Fraction(0)) + c)
            out[key] = v
        self.terms = {k: v for k, v in out.items() if not is_zero(v)}

    @classmethod
    def unit(cls, space: PathSpace, base_word, prefix=(), alignment=0, tail=0, coeff=1) -> "PathFunctional":
        return cls(space, {(tuple(base_word), tuple(prefix), alignment, tail): coeff})

    @property
    def depth(self) -> int:
        return max((len(k[0]) for k in self.terms), default=1)

    def refine(self, depth: int) -> "PathFunctional":
        sys = self.space.sys
        out: dict = {}
        for (w, pre, i, tail), c in self.terms.items():
            words = [w]
            while len(words[0]) < depth:
                words = [u + (a,) for u in words for a in sys.extendable if sys.admissible(u[-1], a)]
            for u in words:
                out[(u, pre, i, tail)] = c
        return PathFunctional(self.space, out)

    def _aligned(self, other: "PathFunctional"):
        d = max(self.depth, other.depth)
        return self.refine(d), other.refine(d)

    def __add__(self, other: "PathFunctional") -> "PathFunctional":
        a, b = self._aligned(other)
        out = dict(a.terms)
        for k, v in b.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return PathFunctional(self.space, out)

    def __mul__(self, c) -> "PathFunctional":
        return PathFunctional(self.space, {k: v * c for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self) -> bool:
        return not self.terms

    def equals(self, other: "PathFunctional") -> bool:
        return (self - other).is_zero()

    def __call__(self, path: SolenoidPath) -> Any:
        letters = None
        total: Any = Fraction(0)
        for (w, pre, i, tail), c in self.terms.items():
            if (pre, i, tail) != (path.prefix, path.alignment, path.tail):
                continue
            if letters is None or len(letters) < len(w):
                letters = self.space.sys.first_letters(path.base, max(len(w), self.depth))
            if letters[: len(w)] == w:
                total = total + c
        return normalize(total)

    def push(self, n: int) -> "PathFunctional":
        """Indicators of ``rhat^n`` of each pattern; ``F o rhat^{-n}`` as a functional."""
        sp_ = self.space
        F = self.refine(max(self.depth, n + 1)) if n > 0 else self
        out: dict = {}
        for key, c in F.terms.items():
            for _ in range(abs(n)):
                key = sp_.key_r_hat(key) if n > 0 else sp_.key_r_hat_inv(key)
            out[key] = out.get(key, Fraction(0)) + c
        return PathFunctional(sp_, out)

    def __repr__(self):
        return f"PathFunctional({self.terms})"


# -- integration ------------------------------------------------------------------


def integrate_lambda_c(
    measure: InvariantMeasure,
    F,
    space: PathSpace | None = None,
    m_max: int | None = None,
    depth: int = 1,
    tail_bound=None,
):
    """``int F dlambda_C``.

    For a :class:`PathFunctional` the answer is exact and the tail bound 0.
    A callable ``F(key)`` is summed over all canonical patterns with prefix
    length at most ``m_max`` and base depth ``depth``; the caller must
    certify the remainder with ``tail_bound``.

    Returns
    -------
    (value, tail_bound)
    """
    if isinstance(F, PathFunctional):
        return normalize(sum((c * measure.cylinder_mass(k[0]) for k, c in F.terms.items()), Fraction(0))), 0
    if tail_bound is None:
        raise TailBoundUnavailable("integrating a general path function needs a certified tail bound")
    if space is None or m_max is None:
        raise ValueError("space and m_max are required for path functions")
    total: Any = Fraction(0)
    for w in measure.sys.words(depth):
        x = measure.sys.cylinder_representative(w)
        for path in space.enumerate_paths(x, m_max):
            key = (w, path.prefix, path.alignment, path.tail)
            total = total + F(key) * measure.cylinder_mass(w)
    return normalize(total), tail_bound


def inner(measure: InvariantMeasure, F: PathFunctional, G: PathFunctional) -> Any:
    a, b = F._aligned(G)
    return normalize(
        sum((c * conj(b.terms[k]) * measure.cylinder_mass(k[0]) for k, c in a.terms.items() if k in b.terms), Fraction(0))
    )


def lambda_invariance_residual(measure: InvariantMeasure, F: PathFunctional, n: int) -> Any:
    """``|int c^{(n)} F o rhat^n dlambda_C - int F dlambda_C|``."""
    sp_ = F.space
    G = F.push(-n)
    lhs: Any = Fraction(0)
    for key, c in G.terms.items():
        lhs = lhs + sp_.fiber_product(key, n) * c * measure.cylinder_mass(key[0])
    rhs, _ = integrate_lambda_c(measure, F)
    return magnitude(normalize(lhs - rhs))


# -- U and pi ------------------------------------------------------------------------


def apply_U(F: PathFunctional) -> PathFunctional:
    """``(UF)(x, omega) = alpha_{i(omega)} sqrt(c(x)) F(rhat(x, omega))``."""
    sp_ = F.space
    out: dict = {}
    for key, c in F.terms.items():
        new = sp_.key_r_hat_inv(key)
        w = key[0]
        out[new] = out.get(new, Fraction(0)) + c * sp_.alpha(new[2]) * sqrt_exact(sp_.sys.n_pre(w[0]))
    return PathFunctional(sp_, out)


def apply_U_inverse(F: PathFunctional) -> PathFunctional:
    """``(U^{-1}F)(x, omega) = alpha^{-1}_{i(omega)+1} F(rhat^{-1}(x, omega)) / sqrt(c(z_1))``."""
    sp_ = F.space
    F = F.refine(max(F.depth, 2))
    out: dict = {}
    for key, c in F.terms.items():
        new = sp_.key_r_hat(key)
        w = key[0]
        coeff = c * sp_.alpha_inv(key[2]) / sqrt_exact(sp_.sys.n_pre(w[1]))
        out[new] = out.get(new, Fraction(0)) + coeff
    return PathFunctional(sp_, out)


def apply_pi(f, F: PathFunctional) -> PathFunctional:
    """Multiply by ``f(base)``; ``f`` a cylinder function or constant."""
    if not isinstance(f, CylinderFunction):
        return F * f
    F = F.refine(max(F.depth, f.depth))
    return PathFunctional(F.space, {k: c * f.at_word(k[0]) for k, c in F.terms.items()})


def covariance_residual(f: CylinderFunction, F: PathFunctional) -> bool:
    """``U pi(f) U^{-1} F == pi(f o r) F`` exactly."""
    lhs = apply_U(apply_pi(f, apply_U_inverse(F)))
    return lhs.equals(apply_pi(f.compose_r(1), F))


# -- Phi ------------------------------------------------------------------------------


def _section_pieces(sp_: PathSpace, key: Key):
    """Split a pattern into pieces of constant section index.

    Yields ``(key, k0)`` for finitely many pieces.  Patterns whose base
    cylinder contains a special point are split along the cycle word; those
    pieces form an exactly periodic family and are returned as
    ``("series", head, block)`` where ``head`` lists the first pieces and
    ``block`` two consecutive periods used to sum the remainder.
    """
    k0 = sp_.key_section_index(key)
    if k0 is not None:
        return [(key, k0)], None
    w, pre, i, tail = key
    sys = sp_.sys

    def piece(q):
        stem = tuple(sp_.rep_letter(i, tail, l) for l in range(q))
        out = []
        for a in sys.extendable:
            if a == sp_.rep_letter(i, tail, q) or not sys.admissible(stem[-1], a):
                continue
            k = (stem + (a,), pre, i, tail)
            if sp_.key_valid(k):
                out.append((k, sp_.key_section_index(k)))
        return out

    return None, piece


def _piece_sum(measure: InvariantMeasure, sp_: PathSpace, pieces) -> Any:
    """``sum c^{(k0)} * lambda(rhat^{-k0} piece)`` over unit-coefficient pieces."""
    total: Any = Fraction(0)
    for key, k0 in pieces:
        moved = PathFunctional(sp_, {key: 1}).push(-k0)
        (mkey,) = moved.terms
        if sp_.key_section_index(mkey) != 0:
            raise AssertionError("shifted piece is not in the cross section")
        total = total + sp_.fiber_product(mkey, k0) * measure.cylinder_mass(mkey[0])
    return normalize(total)


def phi_isometry_residual(measure: InvariantMeasure, F: PathFunctional) -> Any:
    """``| ||F||^2 - sum_k int_A |Phi F(eta, k)|^2 dlambda_C(eta) |``, exact.

    ``Phi F(eta, k) = sqrt(c^{(k)}(eta_0)) F(rhat^k eta)``.  Every pattern is
    cut into pieces with a single section index ``k0``; each piece is moved
    into the cross section by ``rhat^{-k0}`` and weighted by ``c^{(k0)}``.
    Pieces accumulating at a special path are summed as an exact geometric
    series after checking that consecutive periods scale by one ratio.
    """
    sp_ = F.space
    F = F.refine(max(F.depth, 1))
    lhs = normalize(sum((abs2(c) * measure.cylinder_mass(k[0]) for k, c in F.terms.items()), Fraction(0)))
    rhs: Any = Fraction(0)
    for key, c in F.terms.items():
        direct, piece = _section_pieces(sp_, key)
        if direct is not None:
            rhs = rhs + abs2(c) * _piece_sum(measure, sp_, direct)
            continue
        q0 = len(key[0])
        start = q0 + sp_.p + (measure.state_len if measure.weight is not None else 0) + 2
        head = sum((_piece_sum(measure, sp_, piece(q)) for q in range(q0, start)), Fraction(0))
        b1 = [_piece_sum(measure, sp_, piece(q)) for q in range(start, start + sp_.p)]
        b2 = [_piece_sum(measure, sp_, piece(q)) for q in range(start + sp_.p, start + 2 * sp_.p)]
        ratios = {normalize(v2 / v1) for v1, v2 in zip(b1, b2) if not is_zero(v1)}
        if any(is_zero(v1) and not is_zero(v2) for v1, v2 in zip(b1, b2)) or len(ratios) > 1:
            raise AssertionError("pieces near the special path are not geometric")
        ratio = ratios.pop() if ratios else Fraction(0)
        if to_float(ratio) >= 1:
            raise ValueError("special path carries positive mass; Phi is not defined")
        series = normalize(sum(b1, Fraction(0)) / (1 - ratio))
        rhs = rhs + abs2(c) * normalize(head + series)
    return magnitude(normalize(lhs - rhs))


# -- random test objects -----------------------------------------------------------------


def random_functional(
    space: PathSpace,
    rng: random.Random,
    n_terms: int = 5,
    max_prefix: int = 4,
    depth: int = 3,
    coeffs: Iterable | None = None,
) -> PathFunctional:
    """Random finitely supported functional with rational coefficients."""
    sys = space.sys
    words = sys.words(depth)
    terms: dict = {}
    coeffs = list(coeffs) if coeffs is not None else None
    while len(terms) < n_terms:
        w = rng.choice(words)
        m = rng.randint(0, max_prefix)
        pre: tuple = ()
        prev = w[0]
        for _ in range(m):
            prev = rng.choice(sys.predecessors(prev))
            pre += (prev,)
        key = space.canonical_key((w, pre, rng.randrange(space.p), rng.randrange(space.n_tails)))
        if not space.key_valid(key):
            continue
        c = rng.choice(coeffs) if coeffs else Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        if c == 0:
            continue
        terms[key] = c
    return PathFunctional(space, terms)


def random_path(space: PathSpace, rng: random.Random, max_prefix: int = 6, base_len: int = 6) -> SolenoidPath:
    """Random non-special canonical path with an eventually periodic base."""
    sys = space.sys
    while True:
        w = rng.choice(sys.words(base_len))
        x = sys.cylinder_representative(w)
        paths = space.enumerate_paths(x, rng.randint(0, max_prefix))
        path = rng.choice(paths)
        if not space.is_special(path):
            return path


def path_function(space: PathSpace, fn: Callable) -> Callable:
    """Adapt ``fn(path)`` on concrete paths to pattern keys via a representative base."""

    def F(key):
        w, pre, i, tail = key
        x = space.sys.cylinder_representative(w)
        return fn(SolenoidPath(x, pre, i, tail))

    return F
