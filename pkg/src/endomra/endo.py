"""Finite-to-one endomorphisms with exact points.

Two system classes share one letter-level interface so that the path-space
code can treat them alike:

* :class:`SftSystem` -- one-sided subshift of finite type, ``r`` drops the
  first letter.  Points are :class:`EventuallyPeriodicPoint`.
* :class:`TorusSystem` -- ``x -> N x mod 1`` on ``[0, 1)``.  Points are
  ``Fraction`` (exact) or ``float`` (Monte Carlo only).  The "letters" of a
  torus point are its base-N digits, and the preimage ``(x + j)/N`` is the
  point obtained by prepending digit ``j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence, Union

Word = tuple  # tuple[int, ...] of letter indices


class PointError(ValueError):
    """Invalid point encoding for the given system."""


@dataclass(frozen=True)
class Alphabet:
    letters: tuple

    def __post_init__(self):
        if not self.letters:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.letters)) != len(self.letters):
            raise ValueError("alphabet letters must be distinct")
        object.__setattr__(self, "letters", tuple(str(a) for a in self.letters))

    def __len__(self) -> int:
        return len(self.letters)

    def index(self, label) -> int:
        try:
            return self.letters.index(str(label))
        except ValueError:
            raise PointError(f"unknown letter {label!r}") from None

    def parse_word(self, s: str) -> Word:
        s = s.strip()
        if not s:
            return ()
        if any(sep in s for sep in ", "):
            parts = [p for p in s.replace(",", " ").split() if p]
        elif all(len(a) == 1 for a in self.letters):
            parts = list(s)
        else:
            raise PointError(f"multi-character alphabet needs separators: {s!r}")
        return tuple(self.index(p) for p in parts)

    def format_word(self, w: Sequence[int]) -> str:
        sep = "" if all(len(a) == 1 for a in self.letters) else ","
        return sep.join(self.letters[a] for a in w)


@dataclass(frozen=True)
class EventuallyPeriodicPoint:
    """``prefix`` followed by ``period`` repeated forever.

    Stored in canonical form: primitive period, then the prefix shortened as
    far as possible (rotating the period to absorb it).  Two points are equal
    iff their canonical encodings are equal.
    """

    prefix: Word
    period: Word

    def __post_init__(self):
        prefix, period = tuple(self.prefix), tuple(self.period)
        if not period:
            raise PointError("period must be nonempty")
        n = len(period)
        for d in range(1, n + 1):
            if n % d == 0 and period == period[:d] * (n // d):
                period = period[:d]
                break
        while prefix and prefix[-1] == period[-1]:
            prefix = prefix[:-1]
            period = period[-1:] + period[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "period", period)

    def letter(self, i: int) -> int:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.period[(i - len(self.prefix)) % len(self.period)]

    def head(self, k: int) -> Word:
        return tuple(self.letter(i) for i in range(k))

    def shift(self) -> "EventuallyPeriodicPoint":
        if self.prefix:
            return EventuallyPeriodicPoint(self.prefix[1:], self.period)
        return EventuallyPeriodicPoint((), self.period[1:] + self.period[:1])

    def prepend(self, a: int) -> "EventuallyPeriodicPoint":
        return EventuallyPeriodicPoint((a,) + self.prefix, self.period)

    @property
    def is_periodic(self) -> bool:
        return not self.prefix

    def canonical(self) -> "EventuallyPeriodicPoint":
        return EventuallyPeriodicPoint(self.prefix, self.period)


Point = Union[EventuallyPeriodicPoint, Fraction, float]


@dataclass(frozen=True)
class Cycle:
    """Cycle ``x_0, ..., x_{p-1}`` with ``r(x_{i+1}) = x_i`` and ``r(x_0) = x_{p-1}``."""

    points: tuple

    @property
    def period(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int):
        return self.points[i % len(self.points)]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class RepellingCertificate:
    repelling: bool
    c: Fraction
    delta: Fraction


class _SystemBase:
    """Shared helpers; subclasses provide the letter-level primitives."""

    n_letters: int

    def admissible(self, a: int, b: int) -> bool:
        raise NotImplementedError

    def n_pre(self, b: int) -> int:
        """Number of preimages of a point whose first letter is ``b``."""
        raise NotImplementedError

    def is_word(self, w: Sequence[int]) -> bool:
        if not w:
            return True
        if any(a not in self.extendable for a in w[-1:]):
            return False
        return all(self.admissible(a, b) for a, b in zip(w, w[1:]))

    @cached_property
    def extendable(self) -> frozenset:
        return frozenset(range(self.n_letters))

    def words(self, k: int) -> list:
        """Admissible words of length ``k`` that extend to points, in lexicographic order."""
        return list(self._words(k))

    def _words(self, k: int):
        cache = self.__dict__.setdefault("_word_cache", {})
        if k not in cache:
            if k == 0:
                cache[k] = ((),)
            elif k == 1:
                cache[k] = tuple((a,) for a in sorted(self.extendable))
            else:
                shorter = self._words(k - 1)
                cache[k] = tuple(
                    (a,) + w for a in range(self.n_letters) for w in shorter if self.admissible(a, w[0])
                )
        return cache[k]

    def predecessors(self, b: int) -> list:
        return [a for a in range(self.n_letters) if self.admissible(a, b)]

    def fiber_count_after(self, x: Point) -> int:
        """``#r^{-1}(r(x))``."""
        return len(self.preimages(self.apply(x)))

    def preimages_n(self, x: Point, n: int) -> list:
        pts = [x]
        for _ in range(n):
            pts = [y for z in pts for y in self.preimages(z)]
        return pts

    def orbit(self, x: Point, n: int) -> Iterator:
        for _ in range(n):
            yield x
            x = self.apply(x)


@dataclass(frozen=True, eq=False)
class SftSystem(_SystemBase):
    """One-sided subshift of finite type defined by a 0-1 adjacency matrix."""

    alphabet: Alphabet
    adjacency: tuple
    contraction: Fraction = Fraction(1, 2)

    def __post_init__(self):
        adj = tuple(tuple(int(v) for v in row) for row in self.adjacency)
        n = len(self.alphabet)
        if len(adj) != n or any(len(row) != n for row in adj):
            raise ValueError("adjacency must be square and match the alphabet")
        if any(v not in (0, 1) for row in adj for v in row):
            raise ValueError("adjacency entries must be 0 or 1")
        for j in range(n):
            if not any(adj[i][j] for i in range(n)):
                raise ValueError(f"column {self.alphabet.letters[j]} of the adjacency matrix has no 1")
        c = Fraction(self.contraction)
        if not 0 < c < 1:
            raise ValueError("contraction must lie in (0, 1)")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "contraction", c)
        if not self.extendable:
            raise ValueError("adjacency matrix admits no infinite words")

    def __eq__(self, other):
        return isinstance(other, SftSystem) and (self.alphabet, self.adjacency, self.contraction) == (
            other.alphabet,
            other.adjacency,
            other.contraction,
        )

    def __hash__(self):
        return hash((self.alphabet, self.adjacency, self.contraction))

    kind = "sft"

    @property
    def n_letters(self) -> int:
        return len(self.alphabet)

    @cached_property
    def extendable(self) -> frozenset:
        alive = set(range(self.n_letters))
        while True:
            keep = {a for a in alive if any(self.adjacency[a][b] for b in alive)}
            if keep == alive:
                return frozenset(alive)
            alive = keep

    def admissible(self, a: int, b: int) -> bool:
        return self.adjacency[a][b] == 1

    def n_pre(self, b: int) -> int:
        return sum(self.adjacency[i][b] for i in range(self.n_letters))

    # -- points -------------------------------------------------------------

    def validate(self, x) -> EventuallyPeriodicPoint:
        if not isinstance(x, EventuallyPeriodicPoint):
            raise PointError(f"expected an EventuallyPeriodicPoint, got {type(x).__name__}")
        word = x.prefix + x.period + x.period[:1]
        if any(a < 0 or a >= self.n_letters for a in word):
            raise PointError("letter out of range")
        if not all(self.admissible(a, b) for a, b in zip(word, word[1:])):
            raise PointError(f"inadmissible point {self.format_point(x)}")
        return x

    def point(self, prefix="", period=None) -> EventuallyPeriodicPoint:
        """Build a point from label strings, e.g. ``point("12", "1")``."""
        if period is None:
            return self.parse_point(prefix)
        pre = self.alphabet.parse_word(prefix) if isinstance(prefix, str) else tuple(prefix)
        per = self.alphabet.parse_word(period) if isinstance(period, str) else tuple(period)
        return self.validate(EventuallyPeriodicPoint(pre, per))

    def parse_point(self, s: str) -> EventuallyPeriodicPoint:
        """Parse ``"12(1)"`` as prefix ``12`` followed by ``1`` repeated."""
        s = s.strip()
        if not (s.endswith(")") and "(" in s):
            raise PointError(f"SFT point must look like 'prefix(period)': {s!r}")
        pre, per = s[:-1].split("(", 1)
        return self.point(pre, per)

    def format_point(self, x: EventuallyPeriodicPoint) -> str:
        f = self.alphabet.format_word
        return f"{f(x.prefix)}({f(x.period)})"

    def first_letters(self, x, k: int) -> Word:
        return x.head(k)

    def first_letter(self, x) -> int:
        return x.letter(0)

    def apply(self, x):
        return self.validate(x).shift()

    def prepend(self, a: int, x):
        if not self.admissible(a, x.letter(0)):
            raise PointError(f"cannot prepend {self.alphabet.letters[a]} to {self.format_point(x)}")
        return x.prepend(a)

    def preimages(self, x) -> list:
        x = self.validate(x)
        return [x.prepend(a) for a in self.predecessors(x.letter(0))]

    def fiber_count_after(self, x) -> int:
        return self.n_pre(self.validate(x).letter(1))

    def cylinder_representative(self, word: Sequence[int]) -> EventuallyPeriodicPoint:
        """Some eventually periodic point whose first letters are ``word``."""
        word = tuple(word)
        if not word:
            word = (min(self.extendable),)
        if not self.is_word(word):
            raise PointError("inadmissible cylinder word")
        # walk forward inside the extendable set until a letter repeats
        path = list(word)
        seen = {}
        a = path[-1]
        while a not in seen:
            seen[a] = len(path) - 1
            a = min(b for b in self.extendable if self.admissible(a, b))
            path.append(a)
        start = seen[a]
        loop = path[start + 1 :]
        return EventuallyPeriodicPoint(tuple(path[: start + 1]), tuple(loop))

    # -- cycles and metric ---------------------------------------------------

    def enumerate_cycles(self, p_max: int) -> list:
        if p_max < 1:
            raise ValueError("p_max must be >= 1")
        cycles = []
        for p in range(1, p_max + 1):
            for w in itertools.product(range(self.n_letters), repeat=p):
                if any(w[i:] + w[:i] < w for i in range(1, p)):
                    continue
                if any(p % d == 0 and w == w[:d] * (p // d) for d in range(1, p)):
                    continue
                if not all(self.admissible(w[i], w[(i + 1) % p]) for i in range(p)):
                    continue
                x0 = EventuallyPeriodicPoint((), w)
                pts = [x0]
                for _ in range(p - 1):
                    # x_{i+1} = r^{p-1}(x_i): one step backwards along the cycle
                    nxt = pts[-1]
                    for _ in range(p - 1):
                        nxt = nxt.shift()
                    pts.append(nxt)
                cycles.append(Cycle(tuple(pts)))
        return cycles

    def is_repelling(self, cycle: Cycle) -> RepellingCertificate:
        self.validate_cycle(cycle)
        c = self.contraction
        return RepellingCertificate(True, c, c ** cycle.period)

    def validate_cycle(self, cycle: Cycle) -> Cycle:
        p = cycle.period
        if p < 1 or len(set(cycle.points)) != p:
            raise ValueError("cycle points must be distinct")
        for i in range(p):
            if self.apply(cycle[i + 1]) != cycle[i]:
                raise ValueError("cycle violates r(x_{i+1}) = x_i")
        return cycle

    def metric_dist(self, x, y) -> Fraction:
        x, y = self.validate(x), self.validate(y)
        if x == y:
            return Fraction(0)
        bound = max(len(x.prefix), len(y.prefix)) + math.lcm(len(x.period), len(y.period))
        n = next(i for i in range(bound + 1) if x.letter(i) != y.letter(i))
        return self.contraction ** n


@dataclass(frozen=True)
class TorusSystem(_SystemBase):
    """``x -> N x mod 1`` on the circle ``[0, 1)``."""

    degree: int

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 2:
            raise ValueError("degree must be an integer >= 2")
        object.__setattr__(self, "degree", int(self.degree))

    kind = "torus"

    @property
    def n_letters(self) -> int:
        return self.degree

    @cached_property
    def alphabet(self) -> Alphabet:
        return Alphabet(tuple(str(d) for d in range(self.degree)))

    def admissible(self, a: int, b: int) -> bool:
        return True

    def n_pre(self, b: int) -> int:
        return self.degree

    def validate(self, x):
        if isinstance(x, bool) or not isinstance(x, (Fraction, int, float)):
            raise PointError(f"torus points are Fractions or floats, got {type(x).__name__}")
        if not 0 <= x < 1:
            raise PointError(f"torus point {x} outside [0, 1)")
        return Fraction(x) if isinstance(x, int) else x

    def point(self, s) -> Fraction:
        return self.parse_point(s)

    def parse_point(self, s) -> Fraction:
        try:
            return self.validate(Fraction(str(s).strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise PointError(f"bad torus point {s!r}") from exc

    def format_point(self, x) -> str:
        return str(x)

    def first_letter(self, x) -> int:
        return int(math.floor(x * self.degree))

    def first_letters(self, x, k: int) -> Word:
        out = []
        for _ in range(k):
            d = int(math.floor(x * self.degree))
            out.append(d)
            x = x * self.degree - d
        return tuple(out)

    def apply(self, x):
        x = self.validate(x)
        y = x * self.degree
        return y - math.floor(y)

    def prepend(self, a: int, x):
        return (x + a) / self.degree

    def preimages(self, x) -> list:
        x = self.validate(x)
        return [(x + j) / self.degree for j in range(self.degree)]

    def fiber_count_after(self, x) -> int:
        self.validate(x)
        return self.degree

    def cylinder_representative(self, word: Sequence[int]) -> Fraction:
        """Left endpoint of the N-adic interval with digits ``word``."""
        x = Fraction(0)
        for d in reversed(tuple(word)):
            x = (x + d) / self.degree
        return x

    def enumerate_cycles(self, p_max: int) -> list:
        if p_max < 1:
            raise ValueError("p_max must be >= 1")
        cycles = []
        seen = set()
        N = self.degree
        for p in range(1, p_max + 1):
            den = N**p - 1
            found = []
            for num in range(den):
                x0 = Fraction(num, den)
                if x0 in seen:
                    continue
                orbit = [x0]
                y = self.apply(x0)
                while y != x0:
                    orbit.append(y)
                    y = self.apply(y)
                seen.update(orbit)
                if len(orbit) != p:
                    continue
                # x_i = r^{p-i}(x_0)
                pts = [orbit[0]] + [orbit[p - i] for i in range(1, p)]
                found.append(Cycle(tuple(pts)))
            cycles.extend(sorted(found, key=lambda c: c.points[0]))
        return cycles

    def is_repelling(self, cycle: Cycle) -> RepellingCertificate:
        self.validate_cycle(cycle)
        p = cycle.period
        return RepellingCertificate(True, Fraction(1, self.degree), Fraction(1, 2 * self.degree**p))

    def validate_cycle(self, cycle: Cycle) -> Cycle:
        p = cycle.period
        if p < 1 or len(set(cycle.points)) != p:
            raise ValueError("cycle points must be distinct")
        for i in range(p):
            if self.apply(cycle[i + 1]) != cycle[i]:
                raise ValueError("cycle violates r(x_{i+1}) = x_i")
        return cycle

    def metric_dist(self, x, y):
        x, y = self.validate(x), self.validate(y)
        d = abs(x - y)
        return min(d, 1 - d)


DynamicalSystem = Union[SftSystem, TorusSystem]


def golden_mean_shift(contraction=Fraction(1, 2)) -> SftSystem:
    """The two-letter shift forbidding ``22``."""
    return SftSystem(Alphabet(("1", "2")), ((1, 1), (1, 0)), contraction)


# Module-level spellings of the system methods.


def apply(sys: DynamicalSystem, x):
    return sys.apply(x)


def preimages(sys: DynamicalSystem, x) -> list:
    return sys.preimages(x)


def fiber_count_after(sys: DynamicalSystem, x) -> int:
    return sys.fiber_count_after(x)


def enumerate_cycles(sys: DynamicalSystem, p_max: int) -> list:
    return sys.enumerate_cycles(p_max)


def is_repelling(sys: DynamicalSystem, cycle: Cycle) -> RepellingCertificate:
    return sys.is_repelling(cycle)


def metric_dist(sys: DynamicalSystem, x, y):
    return sys.metric_dist(x, y)


def canonical(x):
    if isinstance(x, EventuallyPeriodicPoint):
        return x.canonical()
    return x
