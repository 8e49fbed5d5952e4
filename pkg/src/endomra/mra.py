"""Scaling function, harmonic functions ``h_C``, and the isometry ``S_0``.

``phi(x, omega) = prod_{k>=1} alpha^{-1}_{i(omega)+k} m0(z_k) / sqrt(c(z_k))``

For a depth-``K`` cylinder filter satisfying the low-pass condition every
factor past ``k = m + max(K, 2) - 1`` equals 1, so the product is a finite
exact product.  For trig filters the product is truncated; the remainder
factors satisfy ``|f_k - 1| <= L |z_k - x_{i+k}| / sqrt(N)`` with ``L`` the
derivative bound of ``m0``, and the distances shrink by ``1/N`` per step.

``h_C(x) = sum_{omega in N_C(x)} |phi(x, omega)|^2`` is computed by summing
over paths with prefix at most ``M`` (path-sum route) and as a fixed point
of ``R_W`` pinned on the W-cycles (fixed-point route).  Since ``R_W 1 = 1``
the path measures are probabilities and ``sum_{C'} h_{C'} <= 1`` over
disjoint W-cycles, so ``1 - sum_{C'} u^{C'}_M`` bounds the unsummed mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .endo import Cycle, DynamicalSystem, TorusSystem
from .exact import abs2, is_zero, magnitude, normalize, solve, sqrt_exact, to_complex, to_float
from .measure import InvariantMeasure, integrate, invariant_measure
from .observables import CylinderFunction, TrigPoly
from .ruelle import (
    Filter,
    apply_ruelle,
    conditional_expectation,
    eval_exact,
    find_w_cycles,
    harmonic_space,
    low_pass_residual,
    lyapunov_A,
    qmf_residual,
    weight_from_filter,
)
from .solenoid import PathSpace, SolenoidPath, integrate_lambda_c

TORUS_EPS = 1e-16


class FilterConditionError(ValueError):
    """The filter fails the QMF or low-pass condition."""


class HCInconsistency(RuntimeError):
    """The two ``h_C`` routes disagree beyond their combined bounds."""


@dataclass(frozen=True)
class ScalingEvaluation:
    value: Any
    exact: bool
    tail_bound: Any = 0


def _zero(v) -> bool:
    return isinstance(v, (int, Fraction)) and v == 0


def require_filter_conditions(sys: DynamicalSystem, filt: Filter, cycle: Cycle | None = None) -> None:
    q = qmf_residual(sys, None, filt)
    if not _zero(q):
        raise FilterConditionError(f"QMF condition fails (residual {q})")
    if cycle is not None:
        lp = low_pass_residual(sys, filt, cycle)
        if not _zero(lp):
            raise FilterConditionError(f"low-pass condition fails on the cycle (residual {lp})")


def path_space(sys: DynamicalSystem, cycle: Cycle, filt: Filter) -> PathSpace:
    return PathSpace(sys, cycle, filt.phases or None)


# -- the scaling function -----------------------------------------------------------


def _trig_terms(sys: TorusSystem, m0: TrigPoly, m: int) -> int:
    """Factors needed past the prefix so the torus remainder is below ``TORUS_EPS``."""
    L = max(m0.lipschitz(), 1e-300)
    N = sys.degree
    return max(2, math.ceil(math.log(L / TORUS_EPS) / math.log(N)) + 2)


def eval_scaling(
    sys: DynamicalSystem, cycle: Cycle, filt: Filter, path: SolenoidPath, space: PathSpace | None = None
) -> ScalingEvaluation:
    """``phi(omega)``; exact for cylinder filters, truncated with a bound for trig filters.

    Raises
    ------
    FilterConditionError
        If the low-pass condition fails (the product need not converge).
    """
    space = space or path_space(sys, cycle, filt)
    require_filter_conditions(sys, filt, cycle)
    m0 = filt.m0
    m = len(path.prefix)
    i = path.alignment
    if isinstance(m0, CylinderFunction):
        last = m + max(m0.depth, 2) - 1
        val: Any = Fraction(1)
        z = path.base
        for k in range(1, last + 1):
            z = sys.prepend(space.letter(path, k), z)
            val = val * space.alpha_inv(i + k) * m0(z) / sqrt_exact(sys.fiber_count_after(z))
        return ScalingEvaluation(normalize(val), True, Fraction(0))
    if space.is_special(path):
        return ScalingEvaluation(Fraction(1), True, Fraction(0))
    N = sys.degree
    K = m + _trig_terms(sys, m0, m)
    z = path.base
    val = 1 + 0j
    rt = math.sqrt(N)
    for k in range(1, K + 1):
        z = sys.prepend(space.letter(path, k), z)
        val *= to_complex(space.alpha_inv(i + k)) * m0(z) / rt
    target = cycle[i + K] if path.tail == 0 else Fraction(1)
    d = abs(float(z - target))
    S = m0.lipschitz() * d / (rt * (N - 1))
    return ScalingEvaluation(val, False, abs(val) * math.expm1(S))


def _phi_abs2(sys, cycle, filt, path, space) -> tuple:
    ev = eval_scaling(sys, cycle, filt, path, space)
    if ev.exact:
        return abs2(ev.value), Fraction(0)
    a = abs(ev.value)
    b = ev.tail_bound
    return a * a, 2 * a * b + b * b


# -- h_C: path sums -------------------------------------------------------------------


def _same(a: Cycle, b: Cycle) -> bool:
    return set(a.points) == set(b.points)


def _cycle_filter(sys, filt: Filter, c: Cycle, cycle: Cycle) -> Filter:
    """``filt`` on ``cycle``; on other W-cycles the phases ``m0(x_j)/sqrt(c(x_j))``."""
    if _same(c, cycle):
        return filt
    ph = [normalize(eval_exact(filt.m0, x) / sqrt_exact(sys.fiber_count_after(x))) for x in c.points]
    return filt.with_phases(ph)


def _all_w_cycles(sys, W, cycle: Cycle, p_max: int | None) -> list:
    if p_max is None and isinstance(W, TrigPoly):
        # N - W has at most 2 deg W zeros, so no W-cycle is longer than that
        p_max = 2 * W.degree
    p_max = max(p_max or 0, cycle.period, 1)
    found = find_w_cycles(sys, W, p_max)
    if not any(set(c.points) == set(cycle.points) for c in found):
        raise FilterConditionError("the cycle is not a W-cycle")
    return found


def _sft_path_sum(sys, cycle, filt, m_max: int) -> CylinderFunction:
    """``u_M`` as a cylinder function, by enumerating paths at cylinder representatives."""
    space = path_space(sys, cycle, filt)
    depth = max(filt.m0.depth - 1, 1)

    def u(w):
        x = sys.cylinder_representative(w)
        total: Any = Fraction(0)
        for path in space.enumerate_paths(x, m_max):
            total = total + abs2(eval_scaling(sys, cycle, filt, path, space).value)
        return total

    return CylinderFunction.from_function(sys, depth, u)


def _torus_u0(space: PathSpace, W: TrigPoly, ys: np.ndarray) -> tuple:
    """Empty-prefix path sums at float points, with an absolute truncation bound.

    ``0 <= W <= 1`` and ``W = 1`` at W-cycle points, so ``W' = 0`` there and
    ``1 - W(z) <= sup|W''| d^2 / 2``; with ``d_k <= N^{-k}`` the omitted
    factors cost at most ``sup|W''| N^{-2K} / (2 (N^2 - 1))`` per product.
    """
    sys = space.sys
    N = sys.degree
    W2 = 4 * math.pi**2 * sum(m * m * abs(to_complex(c)) for m, c in W.coeffs.items())
    K = 2
    while W2 * float(N) ** (-2 * K) / (2 * (N * N - 1)) > TORUS_EPS:
        K += 1
    n_terms = space.p * space.n_tails
    total = np.zeros_like(ys)
    z = np.empty_like(ys)
    prod = np.empty_like(ys)
    for i in range(space.p):
        for tail in range(space.n_tails):
            np.copyto(z, ys)
            prod.fill(1.0)
            for k in range(1, K + 1):
                z += space.tail_letter(tail, i + k)
                z /= N
                prod *= W.evaluate_real(z)
            total += prod
    bound = n_terms * W2 * float(N) ** (-2 * K) / (2 * (N * N - 1))
    return total, bound


def _torus_u0_on_grid(space: PathSpace, W: TrigPoly, Q: int, coarse: int = 2**16) -> tuple:
    """``u_0`` at ``j/Q`` by linear interpolation from ``coarse + 1`` nodes on ``[0, 1]``.

    Each product of factors in ``[0, 1]`` has second derivative at most
    ``sum |f_k''| + (sum |f_k'|)^2 <= W2/(N^2-1) + (L/(N-1))^2``, so the
    interpolation error is at most ``h^2/8`` times that per product.
    """
    N = space.sys.degree
    if Q <= coarse:
        return _torus_u0(space, W, np.arange(Q) / Q)
    nodes = np.linspace(0.0, 1.0, coarse + 1)
    vals, trunc = _torus_u0(space, W, nodes)
    W2 = 4 * math.pi**2 * sum(m * m * abs(to_complex(c)) for m, c in W.coeffs.items())
    L = W.lipschitz()
    curv = space.p * space.n_tails * (W2 / (N * N - 1) + (L / (N - 1)) ** 2)
    h = 1.0 / coarse
    out = np.interp(np.arange(Q) / Q, nodes, vals)
    return out, trunc + curv * h * h / 8


def _torus_uM_at(space: PathSpace, W: TrigPoly, x: float, M: int) -> tuple:
    """``u_M(x) = sum over M-letter backward words of W^{(M)} u_0(z_M)``."""
    N = space.sys.degree
    pts = np.array([float(x)])
    wts = np.ones(1)
    for _ in range(M):
        pts = ((pts[:, None] + np.arange(N)[None, :]) / N).ravel()
        wts = (wts[:, None] * np.ones(N)[None, :]).ravel() * W.evaluate_real(pts)
    u0, b = _torus_u0(space, W, pts)
    return float(np.dot(wts, u0)), b


@dataclass
class HCResult:
    """Harmonic function ``h_C`` from one or both routes.

    ``observable`` is exact (cylinder table or trig polynomial) when
    available; ``at(x)`` returns ``(value, bound)`` for the path-sum route.
    """

    cycle: Cycle
    method: str
    observable: Any = None
    tail_bound: Any = 0
    exact: bool = False
    at: Callable | None = None
    checks: dict = field(default_factory=dict)


def h_c_path_sum(sys, cycle, filt, m_max: int = 8, p_max: int | None = None) -> HCResult:
    require_filter_conditions(sys, filt, cycle)
    W = weight_from_filter(sys, filt)
    cycles = _all_w_cycles(sys, W, cycle, p_max)
    if isinstance(filt.m0, CylinderFunction):
        sums = {c: _sft_path_sum(sys, c, _cycle_filter(sys, filt, c, cycle), m_max) for c in cycles}
        u = sums[cycle]
        total = None
        for s in sums.values():
            total = s if total is None else total + s
        gap = (1 - total).refine(u.depth) if total.depth <= u.depth else (1 - total)
        bound = max((v for v in gap.table.values()), key=to_float)
        bound = max(bound, Fraction(0), key=to_float)
        exact = _zero(bound)

        def at(x):
            return u(x), bound

        return HCResult(cycle, "path_sum", u, bound, exact, at)
    spaces = {c: path_space(sys, c, _cycle_filter(sys, filt, c, cycle)) for c in cycles}

    def at(x):
        vals = {}
        trunc = 0.0
        for c, sp_ in spaces.items():
            v, b = _torus_uM_at(sp_, W, x, m_max)
            vals[c] = v
            trunc += b
        gap = max(0.0, 1.0 - sum(vals.values()))
        return vals[cycle], gap + trunc

    return HCResult(cycle, "path_sum", None, None, False, at)


def _pin_values(sys, cycle: Cycle, cycles: list) -> list:
    """``h_C`` on all W-cycle points: 1 on ``C``, 0 on the others.

    Each W-cycle point carries its special path with ``|phi|^2 = 1``, which
    saturates ``sum_{C'} h_{C'} <= 1``.
    """
    out = []
    for c in cycles:
        target = Fraction(1) if set(c.points) == set(cycle.points) else Fraction(0)
        out.extend((x, target) for x in c.points)
    return out


def h_c_fixed_point(sys, cycle, filt, depth: int | None = None, p_max: int | None = None) -> HCResult:
    require_filter_conditions(sys, filt, cycle)
    W = weight_from_filter(sys, filt)
    cycles = _all_w_cycles(sys, W, cycle, p_max)
    if depth is None:
        depth = max(getattr(W, "depth", 0), 2) + 1 if isinstance(W, CylinderFunction) else 0
    basis = harmonic_space(sys, W, depth)
    if not basis:
        raise HCInconsistency("no harmonic functions at this depth")
    pins = _pin_values(sys, cycle, cycles)
    rows = [[eval_exact(b, x) for b in basis] for x, _ in pins]
    coeffs = solve(rows, [t for _, t in pins])
    if coeffs is None:
        raise HCInconsistency("W-cycle values do not determine a unique harmonic function")
    h = basis[0] * coeffs[0]
    for b, c in zip(basis[1:], coeffs[1:]):
        h = h + b * c
    return HCResult(cycle, "fixed_point", h, Fraction(0), True, lambda x: (eval_exact(h, x), Fraction(0)))


def compute_h_c(
    sys: DynamicalSystem,
    cycle: Cycle,
    filt: Filter,
    method: str = "both",
    m_max: int = 8,
    depth: int | None = None,
    p_max: int | None = None,
    check_points: Sequence | None = None,
) -> HCResult:
    """``h_C`` by ``"path_sum"``, ``"fixed_point"`` or ``"both"`` (cross-checked).

    Raises
    ------
    HCInconsistency
        If the routes disagree by more than the path-sum bound.
    """
    if method == "path_sum":
        return h_c_path_sum(sys, cycle, filt, m_max, p_max)
    if method == "fixed_point":
        return h_c_fixed_point(sys, cycle, filt, depth, p_max)
    if method != "both":
        raise ValueError(f"unknown method {method!r}")
    fp = h_c_fixed_point(sys, cycle, filt, depth, p_max)
    ps = h_c_path_sum(sys, cycle, filt, m_max, p_max)
    worst = 0.0
    if isinstance(fp.observable, CylinderFunction):
        u = ps.observable
        d = max(fp.observable.depth, u.depth)
        for w in sys.words(d):
            diff = normalize(fp.observable.at_word(w) - u.at_word(w))
            if ps.exact and not is_zero(diff):
                raise HCInconsistency(f"routes differ on [{sys.alphabet.format_word(w)}]")
            if to_float(magnitude(diff)) > to_float(ps.tail_bound) + 1e-15 or to_float(diff) < -1e-15:
                raise HCInconsistency(f"routes differ on [{sys.alphabet.format_word(w)}]")
            worst = max(worst, to_float(magnitude(diff)))
        points = [sys.format_point(x) for x in (check_points or [])]
    else:
        pts = list(check_points or []) or [x for c in sys.enumerate_cycles(2) for x in c.points] + [
            Fraction(1, 5),
            Fraction(3, 7),
            Fraction(5, 8),
        ]
        for x in pts:
            v, b = ps.at(x)
            h = to_float(eval_exact(fp.observable, x))
            if h + 1e-12 < v or h > v + b + 1e-12:
                raise HCInconsistency(f"routes differ at x = {x}: fixed point {h}, path sum {v} + {b}")
            worst = max(worst, abs(h - v))
        points = [str(x) for x in pts]
    fp.method = "both"
    fp.at = ps.at
    fp.checks = {"max_route_gap": worst, "path_sum_bound": ps.tail_bound, "m_max": m_max, "points": points}
    return fp


# -- correlation and scaling identities ----------------------------------------------------


def correlation_residual(
    sys: DynamicalSystem,
    measure: InvariantMeasure,
    cycle: Cycle,
    filt: Filter,
    f,
    m_max: int,
    h: Any = None,
    p_max: int | None = None,
) -> dict:
    """``|<pi(f) phi, phi> - int f h_C drho|`` with the left side summed over prefixes ``<= m_max``.

    Returns a dict with ``lhs``, ``rhs``, ``residual``, ``tail_bound`` and
    ``exact``.  The residual must not exceed the bound.
    """
    require_filter_conditions(sys, filt, cycle)
    W = weight_from_filter(sys, filt)
    cycles = _all_w_cycles(sys, W, cycle, p_max)
    if h is None:
        h = h_c_fixed_point(sys, cycle, filt, p_max=p_max).observable
    rhs = integrate(measure, h * f)
    if isinstance(filt.m0, CylinderFunction):
        space = path_space(sys, cycle, filt)
        depth = max(f.depth if isinstance(f, CylinderFunction) else 1, filt.m0.depth)
        gap_total = Fraction(0)
        for c in cycles:
            u = _sft_path_sum(sys, c, _cycle_filter(sys, filt, c, cycle), m_max)
            gap_total = gap_total + integrate(measure, u)
        mass_gap = normalize(1 - gap_total)
        fsup = f.sup_abs() if isinstance(f, CylinderFunction) else magnitude(f)
        bound = normalize(fsup * mass_gap)

        def F(key):
            x = sys.cylinder_representative(key[0])
            path = SolenoidPath(x, key[1], key[2], key[3])
            val = abs2(eval_scaling(sys, cycle, filt, path, space).value)
            return (f.at_word(key[0]) if isinstance(f, CylinderFunction) else f) * val

        lhs, _ = integrate_lambda_c(measure, F, space, m_max, depth, tail_bound=bound)
        res = magnitude(normalize(lhs - rhs))
        return {"lhs": lhs, "rhs": rhs, "residual": res, "tail_bound": bound, "exact": _zero(bound)}
    return _torus_correlation(sys, cycle, filt, f, m_max, cycles, rhs)


def _torus_correlation(sys, cycle, filt, f: TrigPoly, M: int, cycles, rhs) -> dict:
    """Left side on the x-grid of ``q`` points via ``u_M = R_W^M u_0``.

    ``(1/q) sum_g f(g/q) u_M(g/q)`` equals
    ``(1/Q) sum_j f(N^M y_j) |m0^{(M)}(y_j)|^2 u_0(y_j)`` with ``y_j = j/Q``,
    ``Q = N^M q``.  ``|m0^{(M)}|^2`` is gathered from one table of
    ``|m0|^2`` on the fine grid.  The rule is run with ``q`` and ``2q`` points
    and the difference is charged to the bound; ``q/2`` exceeds
    ``deg f + deg h_C``.
    """
    N = sys.degree
    f = f if isinstance(f, TrigPoly) else TrigPoly.constant(f)
    W = weight_from_filter(sys, filt)
    # the coarse rule integrates f h_C exactly once u_M is close to h_C
    q = 2 * (f.degree + -(-W.degree // (N - 1)) + 1)
    Q = N**M * q
    j = np.arange(Q, dtype=np.int64)
    ys = j / Q
    m2 = filt.m0.abs2().evaluate_real(ys)
    weight = np.ones(Q)
    idx = j.copy()
    for _ in range(M):
        weight *= m2[idx]
        idx = (idx * N) % Q
    fvals = f.evaluate(idx / Q)
    trunc = 0.0
    u_cycle = None
    u_all = np.zeros(Q)
    for c in cycles:
        sp_ = path_space(sys, c, _cycle_filter(sys, filt, c, cycle))
        u0, b = _torus_u0_on_grid(sp_, W, Q)
        trunc += b
        u_all += u0
        if _same(c, cycle):
            u_cycle = u0
    dense = weight * u_cycle
    fine = complex(np.mean(fvals * dense))
    coarse = complex(np.mean((fvals * dense)[::2]))
    mass = float(np.mean(weight * u_all))
    mass_coarse = float(np.mean((weight * u_all)[::2]))
    quad = abs(fine - coarse) + abs(mass - mass_coarse)
    fsup = f.l1_norm()
    bound = fsup * (max(0.0, 1.0 - mass) + quad + trunc) + quad
    res = abs(fine - to_complex(rhs))
    return {"lhs": fine, "rhs": rhs, "residual": res, "tail_bound": bound, "exact": False, "grid": Q}


def scaling_relation_residual(sys, cycle, filt, paths: Sequence[SolenoidPath]) -> dict:
    """``max |(U phi)(omega) - m0(x) phi(omega)|`` over ``paths``.

    ``(U phi)(omega) = alpha_{i(omega)} sqrt(c(x)) phi(rhat omega)``.
    """
    space = path_space(sys, cycle, filt)
    worst: Any = Fraction(0)
    bound: Any = Fraction(0)
    exact = True
    for path in paths:
        a = eval_scaling(sys, cycle, filt, path, space)
        b = eval_scaling(sys, cycle, filt, space.r_hat(path), space)
        mx = eval_exact(filt.m0, path.base)
        lhs = space.alpha(path.alignment) * sqrt_exact(sys.fiber_count_after(path.base)) * b.value
        rhs = mx * a.value if a.exact else to_complex(mx) * a.value
        if a.exact and b.exact:
            r = magnitude(normalize(lhs - rhs))
        else:
            exact = False
            r = abs(to_complex(lhs) - to_complex(rhs))
            bnd = to_float(magnitude(sqrt_exact(sys.fiber_count_after(path.base)))) * to_float(b.tail_bound) + abs(
                to_complex(mx)
            ) * to_float(a.tail_bound)
            bound = max(to_float(bound), bnd)
        if to_float(r) > to_float(worst):
            worst = r
    return {"residual": worst, "tail_bound": bound, "exact": exact, "n_paths": len(paths)}


# -- S_0 ------------------------------------------------------------------------------------


def s0_apply(sys: DynamicalSystem, filt: Filter, f):
    """``S_0 f = m0 * (f o r)``."""
    m0 = filt.m0
    if isinstance(m0, TrigPoly):
        f = f if isinstance(f, TrigPoly) else TrigPoly.constant(f)
        return m0 * f.compose_power(sys.degree)
    f = f if isinstance(f, CylinderFunction) else CylinderFunction.constant(sys, f)
    return m0 * f.compose_r(1)


class HarmonicWeightError(ValueError):
    """``h`` fails ``(1/#r^{-1}(x)) sum |m0(y)|^2 h(y) = h(x)``."""


def check_qmf_h(sys: DynamicalSystem, filt: Filter, h) -> None:
    W = weight_from_filter(sys, filt)
    h = h if isinstance(h, (CylinderFunction, TrigPoly)) else (
        TrigPoly.constant(h) if isinstance(sys, TorusSystem) else CylinderFunction.constant(sys, h)
    )
    diff = apply_ruelle(sys, W, h) - h
    if not diff.is_zero():
        raise HarmonicWeightError("h is not fixed by the filter's transfer operator")


def _h_inner(measure: InvariantMeasure, u, v, h) -> Any:
    return integrate(measure, u * v.conj() * h)


def s0_isometry_residual(sys, measure: InvariantMeasure, filt: Filter, h, f, g) -> Any:
    """``|<S_0 f, S_0 g>_h - <f, g>_h|``, exact on cylinder and trig classes."""
    check_qmf_h(sys, filt, h)
    if isinstance(sys, TorusSystem):
        conv = lambda u: u if isinstance(u, TrigPoly) else TrigPoly.constant(u)
    else:
        conv = lambda u: u if isinstance(u, CylinderFunction) else CylinderFunction.constant(sys, u)
    f, g, h = conv(f), conv(g), conv(h)
    lhs = _h_inner(measure, s0_apply(sys, filt, f), s0_apply(sys, filt, g), h)
    rhs = _h_inner(measure, f, g, h)
    return magnitude(normalize(lhs - rhs))


# -- purity -------------------------------------------------------------------------------------


@dataclass
class PurityReport:
    """Typical size of ``|m0^{(k)}|^2 E_k^c(|xi|^2)`` for ``k = 1 ... k_max``.

    ``s[k-1]`` is the geometric mean over ``rho`` (exact cylinder sum or Monte
    Carlo); it is exactly 0 when the expression vanishes on a set of
    positive mass.
    """

    k: list
    s: list
    fitted_rate: float | None
    reference_rate: float | None
    hypothesis_ok: bool
    decays: bool
    method: str
    xi: str
    details: dict = field(default_factory=dict)


def _m0_abs2_power(m0: CylinderFunction, k: int) -> CylinderFunction:
    out = m0.abs2()
    base = m0.abs2()
    for l in range(1, k):
        out = out * base.compose_r(l)
    return out


def purity_decay(
    sys: DynamicalSystem,
    measure: InvariantMeasure,
    filt: Filter,
    h,
    xi,
    k_max: int,
    n_samples: int = 4000,
    seed: int = 0,
    reference_A: float | None = None,
    max_words: int = 200_000,
) -> PurityReport:
    """Purity diagnostic for ``S_0``.

    If ``xi`` lay in every range ``S_0^k`` then ``|xi|^2`` would equal
    ``|m0^{(k)}|^2 E_k^c(|xi|^2)`` for all ``k``; decay of the typical size
    to 0 rules that out.  The fitted rate is ``exp`` of the least-squares
    slope of ``log s_k`` and is compared with ``e^{2A}``.
    """
    check_qmf_h(sys, filt, h)
    uniform = measure if measure.weight_tag == "uniform" else invariant_measure(sys)
    m0 = filt.m0
    lyap = None
    if reference_A is None:
        lyap = lyapunov_A(sys, uniform, filt, 2000, seed, orbit_len=200)
        reference_A = lyap.value
        hyp = lyap.hypothesis_ok
    else:
        hyp = True
    if isinstance(m0, TrigPoly):
        hyp = not (m0.abs2() - 1).is_zero()
    ref = math.exp(2 * reference_A) if reference_A != -math.inf else 0.0
    ks = list(range(1, k_max + 1))
    xi_desc = repr(xi)
    if not hyp:
        return PurityReport(ks, [], None, ref, False, False, "none", xi_desc, {"reason": "|m0| = 1 a.e."})
    logs: list = []
    s_vals: list = []
    if isinstance(m0, CylinderFunction) and len(sys.words(k_max + max(m0.depth, xi.depth))) <= max_words:
        method = "exact"
        xi2 = xi.abs2()
        for k in ks:
            sk = _m0_abs2_power(m0, k) * conditional_expectation(sys, uniform, "uniform", xi2, k)
            total = 0.0
            zero = False
            for w, v in sk.items():
                mass = uniform.cylinder_mass(w)
                if is_zero(mass):
                    continue
                if is_zero(v):
                    zero = True
                    break
                total += to_float(mass) * math.log(to_float(v))
            if zero:
                s_vals.append(Fraction(0))
                logs.append(-math.inf)
            else:
                s_vals.append(math.exp(total))
                logs.append(total)
    elif isinstance(m0, TrigPoly):
        method = "monte-carlo"
        rng = np.random.default_rng(seed)
        N = sys.degree
        xs = np.empty((k_max + 1, n_samples))
        xs[k_max] = rng.random(n_samples)
        for l in range(k_max - 1, -1, -1):
            xs[l] = (xs[l + 1] + rng.integers(0, N, size=n_samples)) / N
        m2 = m0.abs2()
        acc = np.zeros(n_samples)
        g = xi.abs2() if isinstance(xi, TrigPoly) else TrigPoly.constant(abs2(xi))
        with np.errstate(divide="ignore"):
            for k in ks:
                acc = acc + np.log(m2.evaluate_real(xs[k - 1]))
                g = g.downsample(N)
                ek = g.evaluate_real(xs[k])
                lk = acc + np.log(np.maximum(ek, 0.0))
                mean = float(np.mean(lk))
                logs.append(mean)
                s_vals.append(0.0 if mean == -math.inf else math.exp(mean))
    else:
        raise ValueError("cylinder depth too large for exact evaluation")
    finite = [(k, l) for k, l in zip(ks, logs) if l != -math.inf]
    rate = None
    if len(finite) >= 2:
        kk, ll = zip(*finite)
        slope = float(np.polyfit(np.array(kk, dtype=float), np.array(ll), 1)[0])
        rate = math.exp(slope)
    elif all(l == -math.inf for l in logs):
        rate = 0.0
    vals = [to_float(v) for v in s_vals]
    decays = all(b <= a for a, b in zip(vals, vals[1:])) and (rate is not None and rate < 1)
    details = {"lyapunov": None if lyap is None else {"value": lyap.value, "stderr": lyap.stderr}}
    return PurityReport(ks, s_vals, rate, ref, True, decays, method, xi_desc, details)


# -- multiplicity ---------------------------------------------------------------------------------


def multiplicity(sys: DynamicalSystem, cycle: Cycle, filt: Filter, x, n: int, h=None, tol: float = 1e-12):
    """``#(r^{-n}(x) cap {h_C != 0})``.

    Exact for cylinder and trig ``h_C`` at exact points.  At float points
    values within ``tol`` of 0 cannot be certified and the answer is the
    interval ``(lower, upper)``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if h is None:
        h = h_c_fixed_point(sys, cycle, filt).observable
    lower = upper = 0
    for y in sys.preimages_n(x, n):
        v = eval_exact(h, y) if not isinstance(y, float) else h(y)
        if isinstance(v, (float, complex)):
            if abs(v) > tol:
                lower += 1
                upper += 1
            else:
                upper += 1
        elif not is_zero(normalize(v)):
            lower += 1
            upper += 1
    return lower if lower == upper else (lower, upper)
