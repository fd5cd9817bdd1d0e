"""Experiment specs, strategy construction from spec strings, and the three commands.

Strategy spec strings look like ``name`` or ``name:key=value,key=value``.
Rationals are written ``a/b``. Parse errors point at the offending column;
errors in a JSON config file point at line and column.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from . import rng as rngmod
from .core import ConfigError, CupState, GameConfig, RoundTrace, int_text, rational_text
from .emptiers import EmptierStrategy
from .engine import run_game
from .fillers import (
    DeskParams,
    FlatAlg,
    ObliviousBase,
    OscillatingFiller,
    RandAlg,
    RandomFiller,
    Repeat,
    TrivAlg,
    UniformFill,
    build_linear_strategy,
    build_oblivious_poly,
    build_poly_strategy,
    oblivious_amplify,
    trivalg2,
)
from .fillers.adaptive import PLACEMENTS
from .monitors import MONITORS


class SpecError(ValueError):
    def __init__(self, message: str, text: str = "", column: Optional[int] = None, line: Optional[int] = None):
        self.message, self.text, self.column, self.line = message, text, column, line
        super().__init__(str(self))

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        head = f"{', '.join(where)}: {self.message}" if where else self.message
        if self.text and self.column is not None and self.line is None:
            return f"{head}\n  {self.text}\n  {' ' * (self.column - 1)}^"
        return head


@dataclass(frozen=True)
class ParsedSpec:
    name: str
    params: dict
    text: str = ""

    def get(self, key, default=None):
        return self.params.get(key, default)


def parse_spec(text: str) -> ParsedSpec:
    """Split ``name:key=value,...`` into a name and a raw-string parameter dict."""
    text = text.strip()
    if not text:
        raise SpecError("empty strategy spec", text, 1)
    name, sep, rest = text.partition(":")
    if not name:
        raise SpecError("missing strategy name", text, 1)
    params = {}
    if sep:
        pos = len(name) + 2
        if not rest:
            raise SpecError("expected key=value after ':'", text, pos)
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq or not key.strip() or not val.strip():
                raise SpecError(f"expected key=value, got {item!r}", text, pos)
            if key.strip() in params:
                raise SpecError(f"duplicate key {key.strip()!r}", text, pos)
            params[key.strip()] = (val.strip(), pos + len(key) + 1)
            pos += len(item) + 1
    return ParsedSpec(name.strip(), params, text)


def _num(spec: ParsedSpec, key: str, default=None, kind=Fraction):
    if key not in spec.params:
        return default
    raw, col = spec.params[key]
    try:
        if kind is int:
            return int(raw)
        if kind is bool:
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if raw.lower() in ("inf", "+inf", "-inf"):
            return float(raw)
        return Fraction(raw)
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"bad value for {key}: {raw!r}", spec.text, col) from None


def _check_keys(spec: ParsedSpec, allowed):
    for key, (_, col) in spec.params.items():
        if key not in allowed:
            raise SpecError(
                f"unknown parameter {key!r} for {spec.name} (allowed: {', '.join(sorted(allowed)) or 'none'})",
                spec.text, col - len(key) - 1,
            )


DESK_KEYS = {"h", "k", "delta_base", "M", "flatten", "n_b", "H"}


def _desk(spec: ParsedSpec) -> DeskParams:
    base = DeskParams()
    k = _num(spec, "k", base.k, int)
    return DeskParams(
        h=_num(spec, "h", base.h),
        k=k,
        delta_base=_num(spec, "delta_base", base.delta_base),
        M=_num(spec, "M", base.M, int),
        flatten_rounds=_num(spec, "flatten", base.flatten_rounds, int),
        n_b=_num(spec, "n_b", base.n_b, int),
        H=_num(spec, "H", base.H),
    )


FILLER_KEYS = {
    "uniform": set(),
    "random": {"denom"},
    "oscillating": set(),
    "trivalg": {"placement"},
    "trivalg2": {"placement"},
    "adaptive-linear": {"placement"},
    "adaptive-poly": {"eps", "placement"},
    "flatalg": {"rounds", "R", "delta"},
    "randalg": {"k"},
    "oblivious-base": DESK_KEYS,
    "oblivious-amplify": DESK_KEYS | {"delta"},
    "oblivious-poly": DESK_KEYS | {"eps", "levels", "delta"},
}


def build_filler(text: str, n: int):
    """Construct a filler from its spec string for a game on ``n`` cups.

    ``repeat=1`` restarts the strategy whenever it finishes.
    """
    spec = parse_spec(text)
    if spec.name not in FILLER_KEYS:
        raise SpecError(f"unknown filler {spec.name!r}", spec.text, 1)
    _check_keys(spec, FILLER_KEYS[spec.name] | {"repeat"})
    name = spec.name
    placement = spec.get("placement", ("grid", 0))[0]
    if placement not in PLACEMENTS:
        raise SpecError(f"placement must be one of {', '.join(PLACEMENTS)}", spec.text, spec.params["placement"][1])
    if name == "uniform":
        f = UniformFill()
    elif name == "random":
        f = RandomFiller(_num(spec, "denom", 8, int))
    elif name == "oscillating":
        f = OscillatingFiller()
    elif name == "trivalg":
        f = TrivAlg(n, placement)
    elif name == "trivalg2":
        f = trivalg2(n, placement)
    elif name == "adaptive-linear":
        f = build_linear_strategy(n, placement)
    elif name == "adaptive-poly":
        f = build_poly_strategy(_num(spec, "eps", Fraction(1, 4)), n, placement)
    elif name == "flatalg":
        f = FlatAlg(_num(spec, "rounds", 4 * n, int), _num(spec, "R"), _num(spec, "delta", 0))
    elif name == "randalg":
        f = RandAlg(_num(spec, "k", 3, int))
    elif name == "oblivious-base":
        f = ObliviousBase(_desk(spec), n)
    elif name == "oblivious-amplify":
        desk = _desk(spec)
        f = oblivious_amplify(ObliviousBase(desk, n), _num(spec, "delta", Fraction(1, 4)), desk, n)
    else:
        f = build_oblivious_poly(
            _num(spec, "eps", Fraction(1, 4)), n, _desk(spec),
            _num(spec, "delta"), _num(spec, "levels", None, int),
        )
    if _num(spec, "repeat", False, bool):
        f = Repeat(f)
    return f


EMPTIER_KEYS = {
    "greedy": {"extra"},
    "perturbed": {"delta", "extra"},
    "uniform": {"extra"},
    "lazy": {"skip", "base", "extra"},
}


def build_emptier(text: str) -> EmptierStrategy:
    spec = parse_spec(text)
    if spec.name not in EMPTIER_KEYS:
        raise SpecError(f"unknown emptier {spec.name!r}", spec.text, 1)
    _check_keys(spec, EMPTIER_KEYS[spec.name])
    base = spec.params.get("base", ("uniform", 0))[0]
    if base not in ("uniform", "greedy"):
        raise SpecError(f"lazy base must be uniform or greedy, got {base!r}", spec.text, spec.params["base"][1])
    return EmptierStrategy(
        spec.name,
        delta=_num(spec, "delta", 0),
        skip_prob=_num(spec, "skip", 0),
        extra=_num(spec, "extra", 0, int),
        base=base,
    )


MONITOR_KEYS = {
    "greedy-invariant": {},
    "flatness": {"R": Fraction, "delta": Fraction},
    "mass-escape": {"N": int},
    "conservation": {},
    "delta-greedy": {"delta": Fraction},
    "anchor-accounting": {},
}


def build_monitors(text: str, n: int) -> list:
    """Parse ``greedy-invariant,flatness:R=4,mass-escape:N=64``.

    A bare ``key=value`` item continues the parameter list of the monitor
    before it, so ``flatness:R=4,delta=1`` works.
    """
    if not text or not text.strip():
        return []
    groups = []
    pos = 1
    for item in text.split(","):
        stripped = item.strip()
        if ":" not in stripped and "=" in stripped and groups:
            groups[-1][0] += "," + stripped
        else:
            groups.append([stripped, pos])
        pos += len(item) + 1
    out = []
    for chunk, col in groups:
        try:
            spec = parse_spec(chunk)
        except SpecError as e:
            raise SpecError(e.message, text, col + (e.column or 1) - 1) from None
        if spec.name not in MONITOR_KEYS:
            raise SpecError(f"unknown monitor {spec.name!r}", text, col)
        try:
            _check_keys(spec, set(MONITOR_KEYS[spec.name]))
        except SpecError as e:
            raise SpecError(e.message, text, col + (e.column or 1) - 1) from None
        cls = MONITORS[spec.name]
        if spec.name == "flatness":
            out.append(cls(_num(spec, "R"), _num(spec, "delta")))
        elif spec.name == "mass-escape":
            out.append(cls(_num(spec, "N", n, int)))
        elif spec.name == "delta-greedy":
            out.append(cls(_num(spec, "delta", 0)))
        else:
            out.append(cls())
    return out


def build_initial(text: str, n: int, exact: bool, seed: int, trial: int) -> CupState:
    """``zeros``, ``fills:v0;v1;...``, or ``random-flat:R=4,denom=8`` (mean-free draw)."""
    text = (text or "zeros").strip()
    head, _, raw = text.partition(":")
    if head.strip() == "fills":
        # values are not key=value pairs, so this form bypasses parse_spec
        try:
            vals = [Fraction(v) for v in raw.split(";")]
        except (ValueError, ZeroDivisionError):
            raise SpecError("fills must be ';'-separated rationals", text, len(head) + 2) from None
        if len(vals) != n:
            raise SpecError(f"fills lists {len(vals)} cups, game has {n}", text, len(head) + 2)
        return CupState.from_fills(vals, exact)
    spec = parse_spec(text)
    if spec.name == "zeros":
        _check_keys(spec, set())
        return CupState.empty(n, exact)
    if spec.name == "random-flat":
        _check_keys(spec, {"R", "denom"})
        R = _num(spec, "R", Fraction(4))
        denom = _num(spec, "denom", 8, int)
        return random_flat_state(n, R, denom, rngmod.stream(seed, trial, rngmod.START), exact)
    raise SpecError(f"unknown initial state {spec.name!r}", spec.text, 1)


def random_flat_state(n: int, R, denom: int, gen, exact: bool = True) -> CupState:
    """Fills drawn on the grid ``1/denom`` with fill-range at most ``R``."""
    top = int(Fraction(R) * denom)
    units = gen.integers(0, top + 1, size=n)
    return CupState.from_fills([Fraction(int(u), denom) for u in units], exact)


@dataclass
class ExperimentSpec:
    n: int = 8
    filler: str = "uniform"
    emptier: str = "greedy"
    rounds: int = 1000
    semantics: str = "negative"
    extra_budget: int = 0
    skip_budget: Optional[int] = None
    seed: int = 0
    arithmetic: str = "exact"
    monitors: str = ""
    strict: bool = True
    initial: str = "zeros"
    trials: int = 1
    predicate: str = "backlog>=-inf"
    workers: int = 1
    trace: Optional[str] = None
    summary: Optional[str] = None

    def config(self) -> GameConfig:
        return GameConfig(self.n, self.semantics, self.extra_budget, self.skip_budget, self.seed, self.arithmetic)

    def to_dict(self) -> dict:
        return asdict(self)


SPEC_FIELDS = {f.name: f for f in fields(ExperimentSpec)}


def _locate(text: str, key: str):
    idx = text.find(f'"{key}"')
    if idx < 0:
        return None, None
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def load_config(text: str) -> dict:
    """Parse a JSON config; keys mirror the CLI flags (dashes or underscores)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(e.msg, line=e.lineno, column=e.colno) from None
    if not isinstance(data, dict):
        raise SpecError("config must be a JSON object", line=1, column=1)
    out = {}
    for key, val in data.items():
        name = key.replace("-", "_")
        if name not in SPEC_FIELDS:
            line, col = _locate(text, key)
            raise SpecError(f"unknown config key {key!r}", line=line, column=col)
        out[name] = val
    return out


def spec_from(config: Optional[dict] = None, **overrides) -> ExperimentSpec:
    data = dict(config or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**data)


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, Fraction):
        return rational_text(x)
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, int):
        return int_text(x)
    return str(x)


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RoundTrace.FIELDS)
    for rec in trace:
        w.writerow([fmt(v) for v in rec.row()])
    return buf.getvalue()


def _jsonify(x):
    if isinstance(x, (Fraction, float)) and not isinstance(x, bool):
        return fmt(x)
    if isinstance(x, dict):
        return {str(k): _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonify(obj), sort_keys=True, indent=2) + "\n"


def _setup(spec: ExperimentSpec, trial: int):
    cfg = spec.config()
    filler = build_filler(spec.filler, spec.n)
    emptier = build_emptier(spec.emptier)
    monitors = build_monitors(spec.monitors, spec.n)
    initial = build_initial(spec.initial, spec.n, cfg.exact, spec.seed, trial)
    return cfg, filler, emptier, monitors, initial


def execute(spec: ExperimentSpec, trial: int = 0, keep_trace: bool = True, record_moves: bool = False):
    cfg, filler, emptier, monitors, initial = _setup(spec, trial)
    res = run_game(cfg, filler, emptier, spec.rounds, monitors, initial, trial,
                   record_moves=record_moves, keep_trace=keep_trace, strict=spec.strict)
    return res, monitors, initial


def summarize(spec: ExperimentSpec, res, monitors, initial) -> dict:
    fin = res.final
    return {
        "config": spec.config().to_dict(),
        "filler": spec.filler,
        "emptier": spec.emptier,
        "rounds_requested": spec.rounds,
        "rounds_played": fin.round,
        "seed": spec.seed,
        "initial_mean": initial.mean(),
        "final": {
            "backlog": fin.backlog,
            "anti_backlog": fin.anti_backlog,
            "mass": fin.mass(),
            "fill_range": fin.fill_range,
        },
        "backlog": fin.backlog,
        "max_backlog": res.max_backlog,
        "strategy_finished": res.strategy_finished,
        "outcome": _outcome(res.outcome),
        "aborted_by": res.aborted_by,
        "monitors": [v.to_dict() for v in res.verdicts],
        "strict_violation": strict_violation(res, monitors),
    }


def _outcome(x):
    if isinstance(x, (list, tuple)):
        return [_outcome(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def strict_violation(res, monitors) -> bool:
    return any(m.aborts and not v.holds for m, v in zip(monitors, res.verdicts))


def cmd_run(spec: ExperimentSpec) -> tuple:
    """Play one game. Returns ``(summary dict, csv text)`` and writes any configured files."""
    res, monitors, initial = execute(spec, 0)
    summary = summarize(spec, res, monitors, initial)
    text = trace_csv(res.trace)
    if spec.trace:
        with open(spec.trace, "w", newline="") as fh:
            fh.write(text)
    if spec.summary:
        with open(spec.summary, "w") as fh:
            fh.write(dumps(summary))
    return summary, text


# --- Monte Carlo -----------------------------------------------------------

def parse_predicate(text: str):
    """``backlog>=X``, ``max-backlog>=X`` or ``untouched`` (returned cup never emptied)."""
    text = text.strip()
    if text == "untouched":
        return ("untouched", None)
    for metric in ("max-backlog", "backlog"):
        if text.startswith(metric + ">="):
            raw = text[len(metric) + 2:]
            try:
                val = float(raw) if "inf" in raw.lower() else Fraction(raw)
            except (ValueError, ZeroDivisionError):
                raise SpecError(f"bad threshold {raw!r}", text, len(metric) + 3) from None
            return (metric, val)
    raise SpecError("predicate must be backlog>=X, max-backlog>=X or untouched", text, 1)


def _trial(args) -> dict:
    spec_dict, trial, pred = args
    spec = ExperimentSpec(**spec_dict)
    kind, val = pred
    res, monitors, initial = execute(spec, trial, keep_trace=False, record_moves=(kind == "untouched"))
    if kind == "untouched":
        cup = res.outcome
        ok = cup is not None and all(cup not in em.cups for _, em in res.moves)
    elif kind == "backlog":
        ok = res.final.backlog >= val
    else:
        ok = res.max_backlog >= val
    return {
        "trial": trial,
        "backlog": res.final.backlog,
        "max_backlog": res.max_backlog,
        "rounds": res.final.round,
        "success": bool(ok),
        "strict_violation": strict_violation(res, monitors),
    }


def clopper_pearson(k: int, n: int, confidence: float = 0.99) -> tuple:
    """Two-sided exact binomial interval for ``k`` successes in ``n`` trials."""
    alpha = 1 - confidence
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def run_trials(spec: ExperimentSpec, workers: Optional[int] = None) -> list:
    pred = parse_predicate(spec.predicate)
    jobs = [(spec.to_dict(), t, pred) for t in range(spec.trials)]
    workers = spec.workers if workers is None else workers
    if workers <= 1:
        return [_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def cmd_montecarlo(spec: ExperimentSpec, workers: Optional[int] = None) -> dict:
    if spec.trials < 1:
        raise ConfigError("trials must be >= 1")
    rows = run_trials(spec, workers)
    wins = sum(r["success"] for r in rows)
    lo, hi = clopper_pearson(wins, len(rows))
    finals = np.array([float(r["backlog"]) for r in rows])
    qs = {str(q): float(np.quantile(finals, q)) for q in (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)}
    summary = {
        "config": spec.config().to_dict(),
        "filler": spec.filler,
        "emptier": spec.emptier,
        "trials": len(rows),
        "predicate": spec.predicate,
        "successes": wins,
        "success_rate": wins / len(rows),
        "ci99": [lo, hi],
        "backlog_quantiles": qs,
        "rounds_total": sum(r["rounds"] for r in rows),
        "strict_violations": sum(r["strict_violation"] for r in rows),
        "per_trial": rows,
    }
    if spec.summary:
        with open(spec.summary, "w") as fh:
            fh.write(dumps(summary))
    return summary


# --- certification ---------------------------------------------------------

def cmd_certify(filler_text: str, sizes) -> dict:
    """Certified ``f`` and ``T`` per size for a constructed chain, plus how it was built."""
    sizes = sorted(set(int(s) for s in sizes))
    if not sizes:
        raise ConfigError("no sizes to certify")
    rows, prov, meta, failure = [], None, {}, None
    for k in sizes:
        # chains depend on the size they are built for, so build one per row
        strat = build_filler(filler_text, k)
        guar = getattr(strat, "guarantee", None)
        if guar is None:
            raise ConfigError(f"{filler_text!r} carries no certified guarantee")
        row = {"n": k, "f": guar.f[k], "T": guar.T[k]}
        m = getattr(strat, "meta", None)
        if m:
            row["levels"] = m.get("levels")
        rows.append(row)
        prov, meta, failure = guar.provenance, dict(m or {}), guar.failure or None
    return {
        "filler": filler_text,
        "table": rows,
        "provenance": _compress(prov),
        "failure": failure,
        "meta": meta,
    }


def _compress(prov) -> list:
    """Collapse runs of identical construction steps into ``{"step": ..., "times": k}``."""
    out = []
    for step in prov:
        if out and out[-1]["step"] == step:
            out[-1]["times"] += 1
        else:
            out.append({"step": step, "times": 1})
    return out


def certify_text(result: dict) -> str:
    lines = [f"# {result['filler']}", "n\tf\tT"]
    for row in result["table"]:
        lines.append(f"{row['n']}\t{fmt(row['f'])}\t{row['T']}")
    return "\n".join(lines) + "\n"
