"""Filters, weights and the transfer operator ``R_W f(x) = sum_{r(y)=x} W(y) f(y)``.

Cylinder weights act on cylinder functions: a depth-``d`` input gives a
depth ``d - 1`` output.  Trigonometric weights act on trigonometric
polynomials: ``R_W f = N * (fiber average of W f)``.  Both are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import sympy as sp

from .endo import Cycle, DynamicalSystem, EventuallyPeriodicPoint, SftSystem, TorusSystem
from .exact import abs2, is_zero, magnitude, normalize, nullspace, sqrt_exact, to_float
from .measure import InvariantMeasure, fiber_average, integrate, sample_points, uniform_weight_table
from .observables import CylinderFunction, TrigPoly

GRID_SIZE = 2**14
W_CYCLE_TOL = 1e-9


class QMFViolation(ValueError):
    """Weight exceeds 1 somewhere, so the filter cannot satisfy the QMF condition."""


@dataclass(frozen=True)
class Filter:
    """``m0`` plus unimodular phases ``alpha_0 ... alpha_{p-1}`` for a chosen cycle."""

    m0: Any
    phases: tuple = ()

    def __post_init__(self):
        if not isinstance(self.m0, (CylinderFunction, TrigPoly)):
            raise TypeError("m0 must be a CylinderFunction or TrigPoly")
        ph = tuple(normalize(a) for a in self.phases)
        for a in ph:
            if not is_zero(normalize(abs2(a) - 1)):
                raise ValueError(f"phase {a} is not unimodular")
        object.__setattr__(self, "phases", ph)

    def phase(self, i: int):
        if not self.phases:
            return Fraction(1)
        return self.phases[i % len(self.phases)]

    def with_phases(self, phases) -> "Filter":
        return Filter(self.m0, tuple(phases))

    def scaled(self, c) -> "Filter":
        return Filter(self.m0 * c, self.phases)


def golden_mean_filter(sys: SftSystem) -> Filter:
    """``m0 = sqrt(2)`` on ``[11]``, ``1`` on ``[12]``, ``0`` on ``[21]``."""
    return Filter(CylinderFunction(sys, 2, {(0, 0): sp.sqrt(2), (0, 1): 1, (1, 0): 0}))


def haar_filter(N: int = 2) -> Filter:
    """``m0(z) = (1 + z + ... + z^{N-1}) / sqrt(N)``."""
    c = normalize(1 / sp.sqrt(N))
    return Filter(TrigPoly({k: c for k in range(N)}))


# -- exact evaluation ---------------------------------------------------------


def eval_exact(f, x) -> Any:
    """Value of a cylinder function or trig polynomial at an exact point."""
    if isinstance(f, CylinderFunction):
        return f(x)
    if isinstance(f, TrigPoly):
        if not isinstance(x, (Fraction, int)):
            return f(x)
        q = sp.Rational(x.numerator, x.denominator) if isinstance(x, Fraction) else sp.Integer(x)
        total = sp.Integer(0)
        for m, c in f.coeffs.items():
            t = 2 * sp.pi * m * q
            total += sp.sympify(c) * (sp.cos(t) + sp.I * sp.sin(t))
        return normalize(sp.expand(total))
    return normalize(f)


def _residual(v) -> Any:
    """Exact zero when ``v`` vanishes, else a magnitude."""
    v = normalize(v)
    if is_zero(v):
        return Fraction(0)
    return magnitude(v)


def _grid_sup(p: TrigPoly, grid: int = GRID_SIZE) -> float:
    xs = np.arange(grid) / grid
    return float(np.max(np.abs(p.evaluate(xs))))


# -- QMF and low-pass ---------------------------------------------------------


def qmf_residual(sys: DynamicalSystem, measure: InvariantMeasure | None, filt: Filter) -> Any:
    """``sup_x |(1/#r^{-1}(x)) sum_{r(y)=x} |m0(y)|^2 - 1|``.

    Exact for cylinder filters.  For trig filters the fiber average is a trig
    polynomial, so the residual is exactly 0 when it is identically 1 and a
    grid sup otherwise.
    """
    m0 = filt.m0
    if isinstance(m0, TrigPoly):
        dev = m0.abs2().downsample(sys.degree) - 1
        if dev.is_zero():
            return Fraction(0)
        if dev.degree == 0:
            return magnitude(dev.coefficient(0))
        return _grid_sup(dev)
    dev = fiber_average(sys, m0.abs2()) - 1
    return max((_residual(v) for v in dev.table.values()), key=to_float)


def low_pass_residual(sys: DynamicalSystem, filt: Filter, cycle: Cycle) -> Any:
    """``max_i |m0(x_i) - alpha_i sqrt(c(x_i))|``."""
    worst: Any = Fraction(0)
    for i, x in enumerate(cycle.points):
        target = filt.phase(i) * sqrt_exact(sys.fiber_count_after(x))
        r = _residual(eval_exact(filt.m0, x) - target)
        if to_float(r) > to_float(worst):
            worst = r
    return worst


# -- weights --------------------------------------------------------------------


def uniform_weight(sys: DynamicalSystem):
    if isinstance(sys, TorusSystem):
        return TrigPoly.constant(Fraction(1, sys.degree))
    return uniform_weight_table(sys)


def weight_from_filter(sys: DynamicalSystem, filt: Filter):
    """``W = |m0|^2 / #r^{-1}(r(.))``.

    Raises
    ------
    QMFViolation
        If ``W > 1`` somewhere; the message names the location.
    """
    m0 = filt.m0
    if isinstance(m0, TrigPoly):
        W = m0.abs2() / sys.degree
        if not (m0.abs2().downsample(sys.degree) - 1).is_zero():
            xs = np.arange(GRID_SIZE) / GRID_SIZE
            vals = W.evaluate_real(xs)
            k = int(np.argmax(vals))
            if vals[k] > 1 + 1e-12:
                raise QMFViolation(f"W = {vals[k]:.6g} > 1 near x = {xs[k]}")
        return W
    depth = max(m0.depth, 2)
    W = CylinderFunction.from_function(sys, depth, lambda w: abs2(m0.at_word(w)) / sys.n_pre(w[1]))
    for w, v in W.items():
        if to_float(v) > 1 and not is_zero(normalize(v - 1)):
            raise QMFViolation(f"W = {v} > 1 on [{sys.alphabet.format_word(w)}]")
    return W


# -- transfer operator -----------------------------------------------------------


def apply_ruelle(sys: DynamicalSystem, W, f):
    """``R_W f``; exact.  Cylinder in, cylinder out (depth drops by one)."""
    if isinstance(W, TrigPoly) or isinstance(f, TrigPoly):
        if not isinstance(sys, TorusSystem):
            raise TypeError("trigonometric polynomials need a torus system")
        W = W if isinstance(W, TrigPoly) else _as_trig(W)
        f = f if isinstance(f, TrigPoly) else _as_trig(f)
        return (W * f).downsample(sys.degree) * sys.degree
    d = max(W.depth, f.depth, 2)
    return CylinderFunction.from_function(
        sys,
        d - 1,
        lambda w: sum(
            (W.at_word((a,) + w) * f.at_word((a,) + w) for a in sys.predecessors(w[0])),
            Fraction(0),
        ),
    )


def _as_trig(f) -> TrigPoly:
    if isinstance(f, CylinderFunction):
        vals = set(f.table.values())
        if len(vals) == 1:
            return TrigPoly.constant(vals.pop())
        raise TypeError("cannot mix non-constant cylinder functions with trig polynomials")
    return TrigPoly.constant(f)


def ruelle_at(sys: DynamicalSystem, W, f, x) -> Any:
    """Pointwise ``sum_{r(y)=x} W(y) f(y)`` at an exact point."""
    return normalize(sum((eval_exact(W, y) * eval_exact(f, y) for y in sys.preimages(x)), Fraction(0)))


def transfer_matrix(sys: DynamicalSystem, W: CylinderFunction, depth: int):
    """Matrix of ``R_W`` on depth-``depth`` cylinder functions.

    Returns ``(words, T)`` with ``(R_W 1_v)(u) = T[u][v]``; the output is
    embedded back at depth ``depth``.
    """
    if depth < W.depth:
        raise ValueError("depth must be at least the weight depth")
    words = sys.words(depth)
    idx = {w: i for i, w in enumerate(words)}
    T = [[Fraction(0)] * len(words) for _ in words]
    for v in words:
        u_head = v[1:]
        for u in words:
            if u[: depth - 1] == u_head:
                T[idx[u]][idx[v]] = W.at_word(v)
    return words, T


def _torus_invariant_degree(sys: TorusSystem, W: TrigPoly, M: int) -> int:
    need = -(-W.degree // (sys.degree - 1))
    return max(M, need)


def harmonic_space(sys: DynamicalSystem, W, depth: int) -> list:
    """Basis of ``{h : R_W h = h}`` in depth-``depth`` cylinder functions, or in
    trig polynomials of degree at most ``depth`` on the torus.

    On the torus the degree is raised if needed so that the polynomial space
    is mapped into itself, which makes the kernel exact.
    """
    if isinstance(W, TrigPoly):
        M = _torus_invariant_degree(sys, W, depth)
        freqs = list(range(-M, M + 1))
        col = {m: i for i, m in enumerate(freqs)}
        n = len(freqs)
        rows = [[Fraction(0)] * n for _ in range(n)]
        for m in freqs:
            img = apply_ruelle(sys, W, TrigPoly({m: 1}))
            for k, c in img.coeffs.items():
                rows[col[k]][col[m]] += c
            rows[col[m]][col[m]] -= 1
        basis = nullspace(rows, n)
        return [TrigPoly({freqs[i]: v for i, v in enumerate(b)}) for b in basis]
    depth = max(depth, W.depth, 2)
    words, T = transfer_matrix(sys, W, depth)
    rows = [[T[i][j] - (1 if i == j else 0) for j in range(len(words))] for i in range(len(words))]
    return [CylinderFunction(sys, depth, dict(zip(words, b))) for b in nullspace(rows, len(words))]


def find_w_cycles(sys: DynamicalSystem, W, p_max: int, tol=None) -> list:
    """Cycles of length at most ``p_max`` on which ``|W - 1| <= tol``.

    ``tol`` defaults to 0 for cylinder weights (exact) and ``1e-9`` for
    trigonometric weights.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if tol is None:
        tol = 0 if isinstance(W, CylinderFunction) else W_CYCLE_TOL
    if tol < 0:
        raise ValueError("tol must be >= 0")
    out = []
    for cyc in sys.enumerate_cycles(p_max):
        if isinstance(W, CylinderFunction):
            devs = [magnitude(normalize(W(x) - 1)) for x in cyc.points]
            ok = all((is_zero(normalize(W(x) - 1)) if tol == 0 else to_float(d) <= tol) for x, d in zip(cyc.points, devs))
        else:
            ok = all(abs(W(x) - 1) <= tol for x in cyc.points)
        if ok:
            out.append(cyc)
    return out


# -- conditional expectations and averaging ---------------------------------------


def _weight_of(measure: InvariantMeasure, V):
    if V is not None and not (isinstance(V, str) and V == "uniform"):
        return V
    if measure.weight is not None:
        return measure.weight
    return uniform_weight(measure.sys)


def ruelle_power(sys: DynamicalSystem, V, f, n: int):
    for _ in range(n):
        f = apply_ruelle(sys, V, f)
    return f


def conditional_expectation(sys: DynamicalSystem, measure: InvariantMeasure, V, f, n: int):
    """``E_n^V f = (R_V^n f) o r^n``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return f
    V = _weight_of(measure, V)
    g = ruelle_power(sys, V, f, n)
    if isinstance(g, TrigPoly):
        return g.compose_power(sys.degree**n)
    return g.compose_r(n)


def pf_residual(measure: InvariantMeasure, V, f) -> Any:
    """``|int R_V f dnu - int f dnu|``."""
    V = _weight_of(measure, V)
    return _residual(integrate(measure, apply_ruelle(measure.sys, V, f)) - integrate(measure, f))


def _l1(measure: InvariantMeasure, g) -> Any:
    if isinstance(g, TrigPoly):
        if g.is_zero():
            return Fraction(0)
        if g.degree == 0:
            return magnitude(g.coefficient(0))
        xs = (np.arange(GRID_SIZE) + 0.5) / GRID_SIZE
        return float(np.mean(np.abs(g.evaluate(xs))))
    return normalize(sum((magnitude(v) * measure.cylinder_mass(w) for w, v in g.items()), Fraction(0)))


def averaging_decay(sys: DynamicalSystem, measure: InvariantMeasure, V, f, n_max: int) -> list:
    """``d_n = || R_V^n f - int f dnu ||_{L^1(nu)}`` for ``n = 0 ... n_max``.

    Exact for cylinder functions and for trig polynomials that become
    constant; other trig cases fall back to a midpoint grid.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    V = _weight_of(measure, V)
    mean = integrate(measure, f)
    out = []
    g = f
    for n in range(n_max + 1):
        out.append(_l1(measure, g - mean))
        g = apply_ruelle(sys, V, g)
    return out


# -- ergodic constants -------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    """Monte Carlo estimate of ``A = int ln|m0| drho``.

    ``zero_mass`` is the exact mass of the zero set of ``m0``; when positive
    the value is ``-inf`` and no average is taken.  ``hypothesis_ok`` is
    False when ``|m0| = 1`` almost everywhere.
    """

    value: float
    stderr: float
    zero_mass: Any
    hypothesis_ok: bool
    n_samples: int
    orbit_len: int
    extra: dict = field(default_factory=dict)


def _abs_m0_is_one(sys, measure: InvariantMeasure, m0) -> bool:
    if isinstance(m0, TrigPoly):
        return (m0.abs2() - 1).is_zero()
    return all(
        is_zero(normalize(abs2(v) - 1)) or is_zero(measure.cylinder_mass(w)) for w, v in m0.items()
    )


def _zero_mass(measure: InvariantMeasure, m0) -> Any:
    if isinstance(m0, TrigPoly):
        return Fraction(1) if m0.is_zero() else Fraction(0)
    return normalize(sum((measure.cylinder_mass(w) for w, v in m0.items() if is_zero(v)), Fraction(0)))


def _log_abs_table(m0: CylinderFunction):
    """Lookup array: window code -> ln|m0|."""
    q = m0.sys.n_letters
    k = m0.depth
    lut = np.full(q**k, -np.inf)
    for w, v in m0.items():
        code = 0
        for a in w:
            code = code * q + a
        mag = to_float(magnitude(v))
        lut[code] = math.log(mag) if mag > 0 else -np.inf
    return lut


def _window_codes(words: np.ndarray, q: int, k: int) -> np.ndarray:
    n, length = words.shape
    codes = np.zeros((n, length - k + 1), dtype=np.int64)
    for j in range(k):
        codes = codes * q + words[:, j : length - k + 1 + j]
    return codes


def birkhoff_log_mean(sys: DynamicalSystem, measure: InvariantMeasure, filt: Filter, x, n: int) -> float:
    """``(1/n) sum_{k<n} ln|m0(r^k x)|``; ``-inf`` if the orbit meets a zero of ``m0``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m0 = filt.m0
    total = 0.0
    if isinstance(sys, TorusSystem) and isinstance(m0, TrigPoly):
        N = sys.degree
        xs = np.empty(n)
        exact_pts = []
        if isinstance(x, Fraction):
            num, den = x.numerator, x.denominator
            for k in range(n):
                xs[k] = num / den
                exact_pts.append(Fraction(num, den))
                num = (num * N) % den
        else:
            for k in range(n):
                xs[k] = x
                x = (x * N) % 1.0
        vals = np.abs(m0.evaluate(xs))
        if exact_pts:
            near = np.flatnonzero(vals < 1e-6)
            if any(is_zero(eval_exact(m0, exact_pts[k])) for k in near):
                return -math.inf
        if np.any(vals == 0):
            return -math.inf
        return float(np.mean(np.log(vals)))
    for _ in range(n):
        v = to_float(magnitude(eval_exact(m0, x)))
        if v == 0:
            return -math.inf
        total += math.log(v)
        x = sys.apply(x)
    return total / n


def generic_point(sys: DynamicalSystem, measure: InvariantMeasure, n_letters: int, seed: int):
    """Exact point whose first ``n_letters`` letters are drawn from ``measure``."""
    if isinstance(sys, TorusSystem):
        rng = np.random.default_rng(seed)
        digits = rng.integers(0, sys.degree, size=n_letters)
        num = 0
        for d in digits:
            num = num * sys.degree + int(d)
        return Fraction(num, sys.degree**n_letters)
    word = tuple(int(a) for a in sample_points(measure, 1, seed, depth=n_letters)[0])
    tail = sys.cylinder_representative(word[-1:])
    return EventuallyPeriodicPoint(word[:-1] + tail.prefix, tail.period)


def lyapunov_A(
    sys: DynamicalSystem,
    measure: InvariantMeasure,
    filt: Filter,
    mc_n: int,
    seed: int,
    orbit_len: int = 1000,
) -> LyapunovEstimate:
    """Monte Carlo estimate of ``A`` from ``mc_n`` orbit averages of length ``orbit_len``.

    Each orbit average is unbiased for ``A`` because the measure is
    invariant; the standard error is taken across orbits.

    Torus orbits are generated backwards, ``x_k = (x_{k+1} + d_k)/N`` with a
    uniform end point and uniform digits, so rounding never accumulates.
    Subshift orbits are windows of a single word sampled from the measure.
    """
    if mc_n < 2 or orbit_len < 1:
        raise ValueError("need mc_n >= 2 and orbit_len >= 1")
    m0 = filt.m0
    zm = _zero_mass(measure, m0)
    hyp = not _abs_m0_is_one(sys, measure, m0)
    if not hyp:
        return LyapunovEstimate(0.0, 0.0, zm, False, mc_n, orbit_len)
    if not is_zero(zm):
        return LyapunovEstimate(-math.inf, 0.0, zm, True, mc_n, orbit_len)
    rng = np.random.default_rng(seed)
    if isinstance(m0, TrigPoly):
        N = sys.degree
        x = rng.random(mc_n)
        acc = np.zeros(mc_n)
        for _ in range(orbit_len):
            x = (x + rng.integers(0, N, size=mc_n)) / N
            # |m0| from the complex value: the real form 1 + cos cancels to 0 near zeros
            acc += np.log(np.abs(m0.evaluate(x)))
        per_orbit = acc / orbit_len
    else:
        k = m0.depth
        lut = _log_abs_table(m0)
        per_orbit = np.empty(mc_n)
        chunk = max(1, 2_000_000 // (orbit_len + k))
        for start in range(0, mc_n, chunk):
            m = min(chunk, mc_n - start)
            words = sample_points(measure, m, int(rng.integers(2**63)), depth=orbit_len + k - 1)
            codes = _window_codes(words, sys.n_letters, k)
            per_orbit[start : start + m] = lut[codes].mean(axis=1)
    value = float(np.mean(per_orbit))
    stderr = float(np.std(per_orbit, ddof=1) / math.sqrt(mc_n))
    return LyapunovEstimate(value, stderr, zm, True, mc_n, orbit_len)
