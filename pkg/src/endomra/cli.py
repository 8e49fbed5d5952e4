"""Config-driven experiment runner.

``endomra run CONFIG [--out DIR] [--seed N] [--parallel] [--timing]`` runs
the analyses listed in a JSON config and writes ``<name>.report.json``.
``endomra table REPORT --analysis NAME --format csv|json`` flattens one
analysis of a report into a table.

Exit codes: 0 all analyses passed, 1 some analysis failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys as _sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import jsonschema

from . import mra
from .endo import Alphabet, Cycle, SftSystem, TorusSystem
from .exact import is_zero, normalize, parse_exact, serialize, to_complex, to_float
from .measure import invariant_measure, strong_invariance_residual
from .observables import CylinderFunction, TrigPoly
from .ruelle import (
    Filter,
    averaging_decay,
    find_w_cycles,
    low_pass_residual,
    lyapunov_A,
    qmf_residual,
    weight_from_filter,
)
from .solenoid import (
    PathSpace,
    lambda_invariance_residual,
    phi_isometry_residual,
    random_functional,
    random_path,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_LITERAL = {
    "oneOf": [
        {"type": "string"},
        {"type": "integer"},
        {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 2, "maxItems": 2},
    ]
}
_OBSERVABLE = {
    "type": "object",
    "properties": {
        "indicator": {"type": "string"},
        "table": {"type": "object", "additionalProperties": _LITERAL},
        "trig": {"type": "object", "additionalProperties": _LITERAL},
        "constant": _LITERAL,
    },
    "minProperties": 1,
    "maxProperties": 1,
    "additionalProperties": False,
}
ANALYSES = (
    "qmf",
    "low_pass",
    "measure",
    "w_cycles",
    "h_c",
    "correlation",
    "scaling",
    "phi_values",
    "averaging",
    "lyapunov",
    "purity",
    "multiplicity",
    "s0_isometry",
    "lambda_invariance",
    "phi_isometry",
)

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["name", "system", "filter", "analyses"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "seed": {"type": "integer", "minimum": 0},
        "system": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["sft", "torus"]}},
            "if": {"properties": {"kind": {"const": "sft"}}},
            "then": {
                "required": ["adjacency"],
                "additionalProperties": False,
                "properties": {
                    "kind": {},
                    "alphabet": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "adjacency": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "array", "items": {"enum": [0, 1]}, "minItems": 1},
                    },
                    "contraction": _LITERAL,
                },
            },
            "else": {
                "required": ["degree"],
                "additionalProperties": False,
                "properties": {"kind": {}, "degree": {"type": "integer", "minimum": 2}},
            },
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "table": {"type": "object", "additionalProperties": _LITERAL, "minProperties": 1},
                "trig": {"type": "object", "additionalProperties": _LITERAL, "minProperties": 1},
                "phases": {"type": "array", "items": _LITERAL},
                "scale": _LITERAL,
            },
            "oneOf": [{"required": ["table"]}, {"required": ["trig"]}],
        },
        "measure": {"enum": ["uniform"]},
        "cycle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "points": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "enumerate": {"type": "integer", "minimum": 1},
                "index": {"type": "integer", "minimum": 0},
            },
            "oneOf": [{"required": ["points"]}, {"required": ["enumerate"]}],
        },
        "analyses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {
                    "name": {"enum": list(ANALYSES)},
                    "label": {"type": "string"},
                    "tolerance": _LITERAL,
                    "seed": {"type": "integer", "minimum": 0},
                    "m_max": {"type": "integer", "minimum": 0},
                    "n_max": {"type": "integer", "minimum": 1},
                    "k_max": {"type": "integer", "minimum": 1},
                    "p_max": {"type": "integer", "minimum": 1},
                    "depth": {"type": "integer", "minimum": 1},
                    "f": _OBSERVABLE,
                    "xi": _OBSERVABLE,
                    "h": _OBSERVABLE,
                    "x": {"type": "string"},
                    "cylinders": {"type": "integer", "minimum": 1},
                    "count": {"type": "integer", "minimum": 1},
                    "n_samples": {"type": "integer", "minimum": 2},
                    "orbit_len": {"type": "integer", "minimum": 1},
                    "method": {"enum": ["both", "path_sum", "fixed_point"]},
                    "expect": {},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Config is well-formed JSON but describes an invalid experiment."""


# -- config parsing -------------------------------------------------------------------


class Context:
    """System, filter, measure and cycle built from a validated config."""

    def __init__(self, config: dict, seed: int):
        self.config = config
        self.seed = seed
        s = config["system"]
        try:
            if s["kind"] == "sft":
                n = len(s["adjacency"])
                letters = s.get("alphabet") or [str(i + 1) for i in range(n)]
                c = parse_exact(s.get("contraction", "1/2"))
                self.sys = SftSystem(Alphabet(tuple(letters)), tuple(map(tuple, s["adjacency"])), Fraction(c))
            else:
                self.sys = TorusSystem(s["degree"])
            self.filter = self._filter(config["filter"])
            self.measure = invariant_measure(self.sys)
            self.cycle = self._cycle(config.get("cycle"))
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    def _filter(self, spec: dict) -> Filter:
        if "table" in spec:
            if not isinstance(self.sys, SftSystem):
                raise ConfigError("cylinder filter tables need an sft system")
            entries = {self.sys.alphabet.parse_word(w): parse_exact(v) for w, v in spec["table"].items()}
            depths = {len(w) for w in entries}
            if len(depths) != 1:
                raise ConfigError("filter table words must all have the same length")
            m0 = CylinderFunction(self.sys, depths.pop(), entries)
        else:
            if not isinstance(self.sys, TorusSystem):
                raise ConfigError("trig filters need a torus system")
            m0 = TrigPoly({int(k): parse_exact(v) for k, v in spec["trig"].items()})
        if "scale" in spec:
            m0 = m0 * parse_exact(spec["scale"])
        return Filter(m0, tuple(parse_exact(a) for a in spec.get("phases", ())))

    def _cycle(self, spec: dict | None) -> Cycle:
        if spec is None:
            spec = {"enumerate": 1}
        if "points" in spec:
            return self.sys.validate_cycle(Cycle(tuple(self.sys.parse_point(p) for p in spec["points"])))
        cycles = self.sys.enumerate_cycles(spec["enumerate"])
        k = spec.get("index", 0)
        if k >= len(cycles):
            raise ConfigError(f"cycle index {k} out of range ({len(cycles)} cycles)")
        return cycles[k]

    def observable(self, spec: dict | None, default=1):
        if spec is None:
            return self.constant(default)
        ((kind, val),) = spec.items()
        try:
            if kind == "constant":
                return self.constant(parse_exact(val))
            if kind == "trig":
                if not isinstance(self.sys, TorusSystem):
                    raise ConfigError("trig observables need a torus system")
                return TrigPoly({int(k): parse_exact(v) for k, v in val.items()})
            if not isinstance(self.sys, SftSystem):
                raise ConfigError("cylinder observables need an sft system")
            if kind == "indicator":
                return CylinderFunction.indicator(self.sys, self.sys.alphabet.parse_word(val))
            entries = {self.sys.alphabet.parse_word(w): parse_exact(v) for w, v in val.items()}
            return CylinderFunction(self.sys, len(next(iter(entries))), entries)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def constant(self, v):
        if isinstance(self.sys, TorusSystem):
            return TrigPoly.constant(v)
        return CylinderFunction.constant(self.sys, v)

    def fmt_point(self, x) -> str:
        return self.sys.format_point(x)

    def fmt_cycle(self, c: Cycle) -> list:
        return [self.fmt_point(x) for x in c.points]


def load_config(path: str | Path) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    return config


# -- serialization ----------------------------------------------------------------------


def jsonable(v: Any) -> Any:
    """Lossless JSON form; non-finite floats become strings."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, complex):
        return [jsonable(v.real), jsonable(v.imag)]
    if isinstance(v, CylinderFunction):
        return {
            "depth": v.depth,
            "table": {v.sys.alphabet.format_word(w): jsonable(x) for w, x in sorted(v.items())},
        }
    if isinstance(v, TrigPoly):
        return {"trig": {str(m): jsonable(c) for m, c in sorted(v.coeffs.items())}}
    return serialize(v)


def _le(a, b) -> bool:
    """``a <= b`` exactly when both are exact, in floats otherwise."""
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a <= b
    return to_float(a) <= to_float(b)


def _provenance(exact: bool) -> str:
    return "exact" if exact else "float+bound"


# -- analyses ---------------------------------------------------------------------------------


def _tolerance(params: dict, default) -> Any:
    return parse_exact(params["tolerance"]) if "tolerance" in params else default


def a_qmf(ctx: Context, params: dict) -> dict:
    r = qmf_residual(ctx.sys, ctx.measure, ctx.filter)
    tol = _tolerance(params, Fraction(0))
    return {"residual": r, "tolerance": tol, "passed": _le(r, tol), "provenance": _provenance(isinstance(r, Fraction))}


def a_low_pass(ctx: Context, params: dict) -> dict:
    r = low_pass_residual(ctx.sys, ctx.filter, ctx.cycle)
    tol = _tolerance(params, Fraction(0))
    return {
        "cycle": ctx.fmt_cycle(ctx.cycle),
        "residual": r,
        "tolerance": tol,
        "passed": _le(r, tol),
        "provenance": _provenance(isinstance(r, Fraction)),
    }


def a_measure(ctx: Context, params: dict) -> dict:
    depth = params.get("depth", 6)
    worst: Any = Fraction(0)
    if isinstance(ctx.sys, SftSystem):
        for d in range(1, depth + 1):
            for w in ctx.sys.words(d):
                r = strong_invariance_residual(ctx.measure, CylinderFunction.indicator(ctx.sys, w))
                if _le(worst, r):
                    worst = r
        masses = {ctx.sys.alphabet.format_word((a,)): ctx.measure.cylinder_mass((a,)) for a in range(ctx.sys.n_letters)}
    else:
        for m in range(1, depth + 1):
            worst = max(worst, strong_invariance_residual(ctx.measure, TrigPoly({m: 1})), key=to_float)
        masses = {str(a): Fraction(1, ctx.sys.degree) for a in range(ctx.sys.degree)}
    return {
        "kind": ctx.measure.kind,
        "letter_masses": masses,
        "strong_invariance_residual": worst,
        "depth": depth,
        "passed": is_zero(worst),
        "provenance": "exact",
    }


def a_w_cycles(ctx: Context, params: dict) -> dict:
    W = weight_from_filter(ctx.sys, ctx.filter)
    tol = params.get("tolerance")
    tol = None if tol is None else to_float(parse_exact(tol))
    found = find_w_cycles(ctx.sys, W, params.get("p_max", 8), tol)
    cycles = [ctx.fmt_cycle(c) for c in found]
    out = {"p_max": params.get("p_max", 8), "cycles": cycles, "passed": bool(found)}
    if "expect" in params:
        want = sorted(sorted(c) for c in params["expect"])
        out["passed"] = sorted(sorted(c) for c in cycles) == want
    return out


def a_h_c(ctx: Context, params: dict) -> dict:
    method = params.get("method", "both")
    try:
        r = mra.compute_h_c(ctx.sys, ctx.cycle, ctx.filter, method, params.get("m_max", 8), params.get("depth"))
    except mra.HCInconsistency as exc:
        return {"passed": False, "error": str(exc)}
    out: dict = {"method": r.method, "exact": r.exact, "provenance": _provenance(r.exact)}
    h = r.observable
    if h is not None:
        out["h_c"] = h
        if isinstance(h, CylinderFunction):
            vals = {normalize(v) for v in h.table.values()}
            if len(vals) == 1:
                out["constant"] = vals.pop()
        elif h.degree == 0:
            out["constant"] = h.coefficient(0)
        out["cycle_values"] = {ctx.fmt_point(x): normalize(mra.eval_exact(h, x)) for x in ctx.cycle.points}
    if r.checks:
        out["cross_check"] = r.checks
    out["passed"] = True
    return out


def _cylinders(ctx: Context, depth: int) -> list:
    return [w for d in range(1, depth + 1) for w in ctx.sys.words(d)]


def a_correlation(ctx: Context, params: dict) -> dict:
    m_max = params.get("m_max", 8)
    h = mra.compute_h_c(ctx.sys, ctx.cycle, ctx.filter, "fixed_point").observable
    if "cylinders" in params:
        if not isinstance(ctx.sys, SftSystem):
            raise ConfigError("'cylinders' needs an sft system")
        fs = [(ctx.sys.alphabet.format_word(w), CylinderFunction.indicator(ctx.sys, w)) for w in _cylinders(ctx, params["cylinders"])]
    else:
        fs = [("f", ctx.observable(params.get("f")))]
    tol = _tolerance(params, None)
    rows = []
    passed = True
    for label, f in fs:
        r = mra.correlation_residual(ctx.sys, ctx.measure, ctx.cycle, ctx.filter, f, m_max, h=h)
        ok = _le(r["residual"], r["tail_bound"]) and (tol is None or _le(r["tail_bound"], tol))
        passed &= ok
        rows.append([label, r["lhs"], r["rhs"], r["residual"], r["tail_bound"], ok])
    return {
        "m_max": m_max,
        "tolerance": tol,
        "max_residual": max((row[3] for row in rows), key=to_float),
        "max_tail_bound": max((row[4] for row in rows), key=to_float),
        "passed": passed,
        "provenance": _provenance(isinstance(ctx.sys, SftSystem)),
        "table": {"columns": ["f", "lhs", "rhs", "residual", "tail_bound", "passed"], "rows": rows},
    }


def a_scaling(ctx: Context, params: dict) -> dict:
    rng = random.Random(params.get("seed", ctx.seed))
    space = mra.path_space(ctx.sys, ctx.cycle, ctx.filter)
    paths = [random_path(space, rng) for _ in range(params.get("count", 50))]
    r = mra.scaling_relation_residual(ctx.sys, ctx.cycle, ctx.filter, paths)
    tol = _tolerance(params, Fraction(0) if r["exact"] else 1e-10)
    ok = _le(r["residual"], tol) if r["exact"] else to_float(r["residual"]) <= to_float(tol) + to_float(r["tail_bound"])
    return {**r, "tolerance": tol, "passed": ok, "provenance": _provenance(r["exact"])}


def a_phi_values(ctx: Context, params: dict) -> dict:
    """phi-hat on every path with prefix <= m_max over cylinder representatives (SFT) or N-adic grid points."""
    space = mra.path_space(ctx.sys, ctx.cycle, ctx.filter)
    m_max, depth = params.get("m_max", 8), params.get("depth", 3)
    if isinstance(ctx.sys, SftSystem):
        bases = [ctx.sys.cylinder_representative(w) for w in ctx.sys.words(depth)]
    else:
        N = ctx.sys.degree
        bases = [Fraction(k, N**depth) for k in range(N**depth)]
    values: set = set()
    n_paths, worst, exact = 0, 0.0, True
    for x in bases:
        for path in space.enumerate_paths(x, m_max):
            ev = mra.eval_scaling(ctx.sys, ctx.cycle, ctx.filter, path, space)
            n_paths += 1
            exact &= ev.exact
            worst = max(worst, abs(to_complex(ev.value)) - to_float(ev.tail_bound))
            if ev.exact:
                values.add(normalize(ev.value))
    out: dict = {"n_paths": n_paths, "m_max": m_max, "depth": depth, "exact": exact,
                 "max_excess_modulus": max(worst - 1, 0.0), "provenance": _provenance(exact)}
    ok = worst <= 1 + 1e-12
    if exact:
        out["values"] = sorted(values, key=lambda v: (abs(to_complex(v)), str(v)))
    if "expect" in params:
        want = {normalize(parse_exact(v)) for v in params["expect"]}
        ok &= exact and values <= want
    out["passed"] = bool(ok)
    return out


def a_averaging(ctx: Context, params: dict) -> dict:
    f = ctx.observable(params.get("f"))
    n_max = params.get("n_max", 20)
    d = averaging_decay(ctx.sys, ctx.measure, "uniform", f, n_max)
    rows = []
    for n, v in enumerate(d):
        ratio = normalize(d[n] / d[n - 1]) if n > 0 and not is_zero(d[n - 1]) else None
        rows.append([n, v, ratio])
    out = {"n_max": n_max, "table": {"columns": ["n", "d_n", "ratio"], "rows": rows}, "provenance": "exact", "passed": True}
    if "expect" in params:
        tol = to_float(_tolerance(params, Fraction(1, 100)))
        last = rows[-1][2]
        out["passed"] = last is not None and abs(to_float(last) - to_float(parse_exact(params["expect"]))) <= tol
    return out


def a_lyapunov(ctx: Context, params: dict) -> dict:
    est = lyapunov_A(ctx.sys, ctx.measure, ctx.filter, params.get("n_samples", 10_000), params.get("seed", ctx.seed), params.get("orbit_len", 100))
    out = {
        "value": est.value,
        "stderr": est.stderr,
        "zero_mass": est.zero_mass,
        "hypothesis_ok": est.hypothesis_ok,
        "n_samples": est.n_samples,
        "orbit_len": est.orbit_len,
        "provenance": "monte-carlo",
        "passed": True,
    }
    if "expect" in params:
        want = to_float(parse_exact(params["expect"]))
        out["passed"] = abs(est.value - want) <= 3 * est.stderr if math.isfinite(want) else est.value == want
    return out


def a_purity(ctx: Context, params: dict) -> dict:
    xi = ctx.observable(params.get("xi"))
    h = ctx.observable(params.get("h"))
    rep = mra.purity_decay(
        ctx.sys, ctx.measure, ctx.filter, h, xi, params.get("k_max", 20), params.get("n_samples", 4000), params.get("seed", ctx.seed)
    )
    passed = rep.hypothesis_ok and rep.decays
    if passed and rep.reference_rate and rep.fitted_rate is not None:
        tol = to_float(_tolerance(params, Fraction(15, 100)))
        passed = abs(rep.fitted_rate - rep.reference_rate) <= tol * rep.reference_rate
    return {
        "k_max": params.get("k_max", 20),
        "xi": xi,
        "method": rep.method,
        "fitted_rate": rep.fitted_rate,
        "reference_rate": rep.reference_rate,
        "hypothesis_ok": rep.hypothesis_ok,
        "decays": rep.decays,
        "passed": passed,
        "provenance": "exact" if rep.method == "exact" else "monte-carlo",
        "table": {"columns": ["k", "s_k"], "rows": [[k, s] for k, s in zip(rep.k, rep.s)]},
    }


def a_multiplicity(ctx: Context, params: dict) -> dict:
    x = ctx.sys.parse_point(params["x"]) if "x" in params else ctx.cycle.points[0]
    n_max = params.get("n_max", 4)
    h = mra.compute_h_c(ctx.sys, ctx.cycle, ctx.filter, "fixed_point").observable
    counts = [mra.multiplicity(ctx.sys, ctx.cycle, ctx.filter, x, n, h=h) for n in range(n_max + 1)]
    # d_{n+1}(x) = sum over r(y) = x of d_n(y)
    recursion_ok = all(
        counts[n + 1] == sum(mra.multiplicity(ctx.sys, ctx.cycle, ctx.filter, y, n, h=h) for y in ctx.sys.preimages(x))
        for n in range(n_max)
    )
    out = {
        "x": ctx.fmt_point(x),
        "recursion_ok": recursion_ok,
        "passed": recursion_ok,
        "provenance": "exact",
        "table": {"columns": ["n", "d_n"], "rows": [[n, c] for n, c in enumerate(counts)]},
    }
    if "expect" in params:
        out["passed"] = recursion_ok and counts[1:] == list(params["expect"])
    return out


def _random_observable(ctx: Context, rng: random.Random):
    if isinstance(ctx.sys, TorusSystem):
        deg = rng.randint(0, 3)
        return TrigPoly({m: Fraction(rng.randint(-4, 4), rng.randint(1, 4)) for m in range(-deg, deg + 1)})
    depth = rng.randint(1, 3)
    return CylinderFunction.from_function(ctx.sys, depth, lambda w: Fraction(rng.randint(-4, 4), rng.randint(1, 4)))


def a_s0_isometry(ctx: Context, params: dict) -> dict:
    rng = random.Random(params.get("seed", ctx.seed))
    h = ctx.observable(params.get("h"))
    worst: Any = Fraction(0)
    for _ in range(params.get("count", 20)):
        f, g = _random_observable(ctx, rng), _random_observable(ctx, rng)
        r = mra.s0_isometry_residual(ctx.sys, ctx.measure, ctx.filter, h, f, g)
        if _le(worst, r):
            worst = r
    tol = _tolerance(params, Fraction(0))
    return {"count": params.get("count", 20), "residual": worst, "tolerance": tol, "passed": _le(worst, tol), "provenance": "exact"}


def _functionals(ctx: Context, params: dict) -> tuple:
    if not isinstance(ctx.sys, SftSystem):
        raise ConfigError("path functionals are implemented for sft systems")
    rng = random.Random(params.get("seed", ctx.seed))
    space = PathSpace(ctx.sys, ctx.cycle, ctx.filter.phases or None)
    return space, [random_functional(space, rng) for _ in range(params.get("count", 100))]


def a_lambda_invariance(ctx: Context, params: dict) -> dict:
    _, fs = _functionals(ctx, params)
    worst: Any = Fraction(0)
    for F in fs:
        for n in range(-3, 4):
            r = lambda_invariance_residual(ctx.measure, F, n)
            if _le(worst, r):
                worst = r
    return {"count": len(fs), "n_range": [-3, 3], "residual": worst, "passed": is_zero(worst), "provenance": "exact"}


def a_phi_isometry(ctx: Context, params: dict) -> dict:
    _, fs = _functionals(ctx, params)
    worst: Any = Fraction(0)
    for F in fs:
        r = phi_isometry_residual(ctx.measure, F)
        if _le(worst, r):
            worst = r
    return {"count": len(fs), "residual": worst, "passed": is_zero(worst), "provenance": "exact"}


REGISTRY: dict[str, Callable[[Context, dict], dict]] = {
    "qmf": a_qmf,
    "low_pass": a_low_pass,
    "measure": a_measure,
    "w_cycles": a_w_cycles,
    "h_c": a_h_c,
    "correlation": a_correlation,
    "scaling": a_scaling,
    "phi_values": a_phi_values,
    "averaging": a_averaging,
    "lyapunov": a_lyapunov,
    "purity": a_purity,
    "multiplicity": a_multiplicity,
    "s0_isometry": a_s0_isometry,
    "lambda_invariance": a_lambda_invariance,
    "phi_isometry": a_phi_isometry,
}


def run_analysis(config: dict, seed: int, index: int, timing: bool = False) -> dict:
    """Run analysis ``index`` of ``config``; failures are recorded, not raised."""
    params = config["analyses"][index]
    ctx = Context(config, seed)
    t0 = time.perf_counter()
    try:
        result = REGISTRY[params["name"]](ctx, params)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, NotImplementedError, TypeError) as exc:
        result = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
    record = {
        "name": params["name"],
        "label": params.get("label", params["name"]),
        "inputs": {k: v for k, v in params.items() if k not in ("name", "label")},
        "result": {k: v for k, v in result.items() if k != "passed"},
        "passed": bool(result["passed"]),
    }
    if timing:
        record["wall_clock_s"] = round(time.perf_counter() - t0, 3)
    return jsonable(record)


def run(config: dict, seed: int | None = None, parallel: bool = False, timing: bool = False) -> dict:
    """Run every analysis in declaration order and return the report."""
    seed = config.get("seed", 0) if seed is None else seed
    Context(config, seed)  # surface config errors before any work
    idx = range(len(config["analyses"]))
    if parallel:
        with ProcessPoolExecutor() as pool:
            records = list(pool.map(run_analysis, [config] * len(idx), [seed] * len(idx), idx, [timing] * len(idx)))
    else:
        records = [run_analysis(config, seed, i, timing) for i in idx]
    return {
        "name": config["name"],
        "seed": seed,
        "config": config,
        "analyses": records,
        "passed": all(r["passed"] for r in records),
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# -- tables -------------------------------------------------------------------------------------


def emit_table(report: dict, which: str, fmt: str) -> str:
    """Flat table for one analysis (by label or name) as CSV or JSON text.

    Analyses without a table give one row of their scalar results.
    """
    records = report.get("analyses") or []
    if not records:
        raise ConfigError("report has no analyses")
    match = [r for r in records if r.get("label") == which] or [r for r in records if r.get("name") == which]
    if not match:
        raise ConfigError(f"no analysis named {which!r} in report")
    res = match[0]["result"]
    if "table" in res:
        columns, rows = res["table"]["columns"], res["table"]["rows"]
    else:
        scalars = {k: v for k, v in res.items() if not isinstance(v, (dict, list))}
        scalars["passed"] = match[0]["passed"]
        columns, rows = list(scalars), [list(scalars.values())]
    if fmt == "json":
        return json.dumps([dict(zip(columns, row)) for row in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([json.dumps(v) if isinstance(v, (list, dict)) else v for v in row])
    return buf.getvalue()


# -- entry point --------------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="endomra", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the analyses in a config")
    r.add_argument("config")
    r.add_argument("--out", default=".", help="directory for the report (default: current)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--parallel", action="store_true", help="run analyses in worker processes")
    r.add_argument("--timing", action="store_true", help="record wall-clock seconds (reports then differ run to run)")
    t = sub.add_parser("table", help="flatten one analysis of a report")
    t.add_argument("report")
    t.add_argument("--analysis", required=True)
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.add_argument("--out", default=None, help="output file (default: stdout)")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.cmd == "run":
            config = load_config(args.config)
            report = run(config, args.seed, args.parallel, args.timing)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"{config['name']}.report.json"
            path.write_text(dump_report(report))
            for rec in report["analyses"]:
                status = "PASS" if rec["passed"] else "FAIL"
                err = rec["result"].get("error")
                print(f"{status}  {rec['label']}" + (f"  ({err})" if err else ""))
            print(f"report: {path}")
            return EXIT_OK if report["passed"] else EXIT_FAIL
        try:
            report = json.loads(Path(args.report).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report: {exc}") from exc
        text = emit_table(report, args.analysis, args.format)
        if args.out:
            Path(args.out).write_text(text)
        else:
            _sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
