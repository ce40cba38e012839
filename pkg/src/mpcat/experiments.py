"""Experiment orchestration: plans, runners, CSV and plot-script output.

A plan is parsed from a single JSON document (unknown keys rejected) and
executed by one of five runners: the single-particle entropy scan over N,
one multi-particle system, the classical baseline, and the sweeps over the
scattering strength V and the small-particle count I.  Results go to a CSV
with the fixed header

    config_hash,N,n,I,V,R,J,S_nats,method,walltime_s

plus a gnuplot script and a JSON metadata sidecar.  Reruns with the same
plan and seeds produce byte-identical CSVs for any worker count; wall
times are recorded only when timing is explicitly enabled, since they are
not reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import GridSampler, MonteCarloSampler, classical_entropy_series
from .errors import BudgetError, ConfigError, NumericError
from .histories import DEFAULT_MAX_BYTES, direct_bytes, entropy_series, omega_bytes
from .kinematics import SystemConfig

CSV_HEADER = ["config_hash", "N", "n", "I", "V", "R", "J", "S_nats", "method", "walltime_s"]

KINDS = ("single", "multi", "classical", "sweep_v", "sweep_i")

_KIND_ALIASES = {
    "single": "single", "single_cat": "single",
    "multi": "multi", "multi_cat": "multi",
    "classical": "classical",
    "sweep_v": "sweep_v", "sweep-v": "sweep_v",
    "sweep_i": "sweep_i", "sweep-i": "sweep_i",
}


def normalize_kind(kind):
    if kind is None:
        return None
    return _KIND_ALIASES.get(str(kind).lower(), kind)

# Desk-scale defaults; the heavy tier unlocks the largest systems.
DEFAULT_N_VALUES = [16, 32, 64]
HEAVY_N_VALUES = [16, 32, 64, 128, 256]
DEFAULT_V_VALUES = [0.0] + [2.0**e for e in range(-2, 6)]  # 0 plus [2^-2, 2^5]
DEFAULT_I_VALUES = [1, 2, 3]
SWEEP_V_J_MAX = 4


@dataclass(frozen=True)
class Budget:
    """Hard ceilings checked before any large allocation."""

    max_dim: int = 1024            # dense propagator side
    max_words: int = 4096          # K^J history-tree width
    max_bytes: int = DEFAULT_MAX_BYTES
    max_walltime_s: float | None = None


HEAVY_BUDGET = Budget(max_dim=4096, max_words=4096, max_bytes=int(3.5 * 2**30))


@dataclass
class ExperimentPlan:
    kind: str
    configs: list                     # SystemConfig instances, run order
    out_dir: str = "."
    budget: Budget = field(default_factory=Budget)
    method: str = "auto"
    checkpoint_every: int = 1
    heavy: bool = False
    seed: int | None = None
    bits: bool = False                # append an S/ln2 column to the CSV
    # classical sampler selection
    grid: int = 4096
    samples: int | None = None        # Monte Carlo when set
    j_max_classical: int = 6


@dataclass
class ResultRecord:
    config_hash: str
    N: int
    n: int
    I: int
    V: float
    R: int
    J: int
    S_nats: float
    method: str
    walltime_s: float = 0.0
    workers: int = 1


_CONFIG_KEYS = {
    "kind", "N", "n", "I", "V", "R", "shifts", "K_cells", "J_max", "method",
    "N_values", "V_values", "I_values", "grid", "samples", "seed", "heavy",
    "checkpoint_every", "bits", "budget",
}
_BUDGET_KEYS = {"max_dim", "max_words", "max_bytes", "max_walltime_s"}


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def _system_config(doc: dict, **overrides) -> SystemConfig:
    kwargs = {}
    for key in ("N", "n", "I", "V", "R", "K_cells", "J_max"):
        if key in doc:
            kwargs[key] = doc[key]
    if doc.get("shifts") is not None:
        kwargs["shifts"] = tuple(doc["shifts"])
    kwargs.update(overrides)
    _require("N" in kwargs, "field 'N' is required")
    try:
        return SystemConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"invalid system parameters: {exc}") from exc


def parse_config(source, kind: str | None = None, heavy: bool = False,
                 method: str | None = None, seed: int | None = None) -> ExperimentPlan:
    """Validate a JSON plan (path, file object, or dict) into an ExperimentPlan.

    The experiment kind comes from the document or the caller; when both are
    given they must agree.  Unknown keys are rejected by name.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        try:
            with open(source) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "config root must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    _require(not unknown, f"unknown config key(s): {', '.join(sorted(unknown))}")

    doc_kind = normalize_kind(doc.get("kind"))
    kind = normalize_kind(kind)
    if doc_kind is not None and kind is not None and doc_kind != kind:
        raise ConfigError(f"config kind {doc_kind!r} conflicts with requested {kind!r}")
    kind = doc_kind or kind or "multi"
    _require(kind in KINDS, f"field 'kind': expected one of {KINDS}, got {kind!r}")

    heavy = bool(doc.get("heavy", heavy))
    budget_doc = doc.get("budget", {})
    _require(isinstance(budget_doc, dict), "field 'budget' must be an object")
    unknown = set(budget_doc) - _BUDGET_KEYS
    _require(not unknown, f"unknown budget key(s): {', '.join(sorted(unknown))}")
    budget = replace(HEAVY_BUDGET if heavy else Budget(), **budget_doc)

    method = doc.get("method", method) or "auto"
    _require(method in ("auto", "direct", "omega"),
             f"field 'method': expected auto|direct|omega, got {method!r}")
    seed = doc.get("seed", seed)

    configs = []
    if kind == "single":
        n_values = doc.get("N_values", doc.get("N") and [doc["N"]] or None)
        if n_values is None:
            n_values = HEAVY_N_VALUES if heavy else DEFAULT_N_VALUES
        _require(isinstance(n_values, list) and n_values,
                 "field 'N_values' must be a nonempty list")
        for N in n_values:
            configs.append(_system_config({k: v for k, v in doc.items()
                                           if k in ("J_max", "K_cells")},
                                          N=N, I=0, V=0.0))
    elif kind == "multi":
        configs.append(_system_config(doc))
    elif kind == "classical":
        pass
    elif kind == "sweep_v":
        base = dict(doc)
        base.setdefault("N", 16)
        base.setdefault("n", 2)
        base.setdefault("I", 3 if heavy else 2)
        base.setdefault("J_max", SWEEP_V_J_MAX)
        v_values = doc.get("V_values", DEFAULT_V_VALUES)
        _require(isinstance(v_values, list) and v_values,
                 "field 'V_values' must be a nonempty list")
        for V in v_values:
            configs.append(_system_config(base, V=float(V)))
    elif kind == "sweep_i":
        base = dict(doc)
        base.setdefault("N", 16)
        base.setdefault("n", 2)
        base.setdefault("V", 8.0)
        i_values = doc.get("I_values", DEFAULT_I_VALUES)
        _require(isinstance(i_values, list) and i_values,
                 "field 'I_values' must be a nonempty list")
        for I in i_values:
            configs.append(_system_config(base, I=int(I)))

    for cfg in configs:
        if cfg.dim > budget.max_dim:
            raise BudgetError(
                f"total dimension {cfg.dim} exceeds budget max_dim={budget.max_dim}"
            )
        if cfg.K_cells**cfg.J_max > budget.max_words and method == "direct":
            raise BudgetError(
                f"K^J_max = {cfg.K_cells**cfg.J_max} exceeds budget "
                f"max_words={budget.max_words}"
            )

    grid = doc.get("grid", 4096)
    _require(isinstance(grid, int) and grid > 0, "field 'grid' must be a positive integer")
    samples = doc.get("samples")
    if samples is not None:
        _require(isinstance(samples, int) and samples > 0,
                 "field 'samples' must be a positive integer")

    return ExperimentPlan(
        kind=kind, configs=configs, budget=budget, method=method,
        checkpoint_every=int(doc.get("checkpoint_every", 1)), heavy=heavy,
        seed=seed, bits=bool(doc.get("bits", False)), grid=grid, samples=samples,
        j_max_classical=int(doc.get("J_max", 6)) if kind == "classical" else 6,
    )


# --- runners ---------------------------------------------------------------


class _Clock:
    """Tracks the plan's wall-time budget; timing stays out of results
    unless explicitly enabled."""

    def __init__(self, budget: Budget, timing: bool):
        self.t0 = time.monotonic()
        self.budget = budget
        self.timing = timing

    def over_budget(self) -> bool:
        limit = self.budget.max_walltime_s
        return limit is not None and time.monotonic() - self.t0 > limit

    def stamp(self, t_start: float) -> float:
        return time.monotonic() - t_start if self.timing else 0.0


def _series_records(cfg: SystemConfig, series, clock, t_start, workers) -> list:
    stamp = clock.stamp(t_start)
    return [
        ResultRecord(
            config_hash=cfg.hash(), N=cfg.N, n=cfg.n, I=cfg.I, V=cfg.V, R=cfg.R,
            J=J, S_nats=S, method=series.method, walltime_s=stamp, workers=workers,
        )
        for J, S in series.entries
    ]


def _classical_hash(meta: dict) -> str:
    blob = json.dumps(meta, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _classical_records(series, clock, t_start) -> list:
    stamp = clock.stamp(t_start)
    h = _classical_hash(series.metadata)
    return [
        ResultRecord(config_hash=h, N=0, n=0, I=0, V=0.0, R=0, J=J, S_nats=S,
                     method="classical", walltime_s=stamp)
        for J, S in series.entries
    ]


def _run_configs(plan: ExperimentPlan, clock: _Clock, workers: int):
    """Shared loop: one entropy series per config, soft budget truncation."""
    records, truncated, skipped = [], {}, []
    for cfg in plan.configs:
        if clock.over_budget():
            skipped.append(cfg.hash())
            continue
        t0 = time.monotonic()
        ckpt = None
        if plan.checkpoint_every > 0:
            ckpt = os.path.join(plan.out_dir, f"{plan.kind}_{cfg.hash()}.ckpt")
        series = entropy_series(
            cfg, method=plan.method, max_bytes=plan.budget.max_bytes,
            workers=workers, checkpoint_path=ckpt,
            checkpoint_every=plan.checkpoint_every,
        )
        records.extend(_series_records(cfg, series, clock, t0, workers))
        if "truncated_at" in series.metadata:
            truncated[cfg.hash()] = series.metadata["truncated_at"]
    meta = {}
    if truncated:
        meta["truncated"] = truncated
    if skipped:
        meta["walltime_skipped"] = skipped
    return records, meta


def run_fig1(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    """Single-particle S(J) over an N scan, with the classical reference
    series and the 2 ln N ceilings noted in the metadata."""
    clock = _Clock(plan.budget, timing)
    records, meta = _run_configs(plan, clock, workers)
    t0 = time.monotonic()
    series = classical_entropy_series(max(c.J_max for c in plan.configs),
                                      sampler=GridSampler(plan.grid))
    records.extend(_classical_records(series, clock, t0))
    meta["ceilings"] = {c.N: 2.0 * float(np.log(c.N)) for c in plan.configs}
    meta["ks_slope"] = float(np.log((3.0 + np.sqrt(5.0)) / 2.0))
    return records, meta


def run_multi(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    clock = _Clock(plan.budget, timing)
    return _run_configs(plan, clock, workers)


def run_classical(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    clock = _Clock(plan.budget, timing)
    t0 = time.monotonic()
    if plan.samples is not None:
        sampler = MonteCarloSampler(samples=plan.samples, seed=plan.seed or 0)
    else:
        sampler = GridSampler(plan.grid)
    series = classical_entropy_series(plan.j_max_classical, sampler=sampler)
    return _classical_records(series, clock, t0), {"sampler": series.metadata}


def plateau_diagnostic(records, split: float = 4.0, at_J: int = SWEEP_V_J_MAX):
    """Ratio of the relative variation of S(at_J, V) above the split V to the
    variation below it; a value below 1 means the upper range is flatter."""
    by_v = {}
    for r in records:
        if r.J == at_J and r.method != "classical":
            by_v[r.V] = r.S_nats
    low = [s for v, s in by_v.items() if v <= split]
    high = [s for v, s in by_v.items() if v >= split]
    if len(low) < 2 or len(high) < 2:
        return None
    rv = lambda xs: (max(xs) - min(xs)) / float(np.mean(xs))
    low_rv, high_rv = rv(low), rv(high)
    return {
        "at_J": at_J, "split_V": split, "lower_rv": low_rv, "upper_rv": high_rv,
        "ratio": high_rv / low_rv if low_rv > 0 else float("inf"),
    }


def run_sweep_V(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    """S(J, V) grid at fixed (N, n, I); records the plateau diagnostic."""
    clock = _Clock(plan.budget, timing)
    records, meta = _run_configs(plan, clock, workers)
    meta["V_values"] = [c.V for c in plan.configs]
    diag = plateau_diagnostic(records)
    if diag is not None:
        meta["plateau_diagnostic"] = diag
    return records, meta


def run_sweep_I(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    """S_I(J) for a scan over the small-particle count, with the V=0
    single-particle baseline; enforces monotone growth with I for J >= 4."""
    clock = _Clock(plan.budget, timing)
    records, meta = _run_configs(plan, clock, workers)
    base_cfg = plan.configs[0]
    baselines = [replace(base_cfg, I=0, V=0.0, shifts=None)]
    if plan.heavy:
        baselines.append(replace(base_cfg, N=256, I=0, V=0.0, shifts=None))
    for cfg in baselines:
        if clock.over_budget():
            break
        if cfg.dim > plan.budget.max_dim:
            meta.setdefault("baseline_skipped", []).append(cfg.hash())
            continue
        t0 = time.monotonic()
        series = entropy_series(cfg, method=plan.method,
                                max_bytes=plan.budget.max_bytes, workers=workers)
        records.extend(_series_records(cfg, series, clock, t0, workers))

    by_key = {(r.I, r.J): r.S_nats for r in records if r.V == base_cfg.V and r.I > 0}
    i_values = sorted({r.I for r in records if r.I > 0})
    for J in range(4, max((c.J_max for c in plan.configs), default=0) + 1):
        seq = [by_key[(i, J)] for i in i_values if (i, J) in by_key]
        for a, b in zip(seq, seq[1:]):
            if b < a - 1e-6:
                raise NumericError(
                    f"S_I(J={J}) not nondecreasing in I: {seq}"
                )
    meta["I_values"] = i_values
    return records, meta


_RUNNERS = {
    "single": run_fig1,
    "multi": run_multi,
    "classical": run_classical,
    "sweep_v": run_sweep_V,
    "sweep_i": run_sweep_I,
}


def run_plan(plan: ExperimentPlan, workers: int = 1, timing: bool = False):
    os.makedirs(plan.out_dir, exist_ok=True)
    return _RUNNERS[plan.kind](plan, workers=workers, timing=timing)


# --- persistence -----------------------------------------------------------


def _fmt_float(x: float) -> str:
    return repr(float(x))


def emit_csv(records, path, bits: bool = False) -> None:
    """Write records under the fixed header; formatting is deterministic so
    identical results give identical bytes."""
    header = CSV_HEADER + (["S_bits"] if bits else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            row = [r.config_hash, r.N, r.n, r.I, _fmt_float(r.V), r.R, r.J,
                   _fmt_float(r.S_nats), r.method, f"{r.walltime_s:.6f}"]
            if bits:
                row.append(_fmt_float(r.S_nats / float(np.log(2.0))))
            writer.writerow(row)


def parse_csv(path) -> list:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(ResultRecord(
                config_hash=row["config_hash"], N=int(row["N"]), n=int(row["n"]),
                I=int(row["I"]), V=float(row["V"]), R=int(row["R"]), J=int(row["J"]),
                S_nats=float(row["S_nats"]), method=row["method"],
                walltime_s=float(row["walltime_s"]),
            ))
    return records


def emit_plot_script(records, path, kind: str, csv_name: str = "results.csv") -> None:
    """Standalone gnuplot commands plotting S(J) in nats against J."""
    lines = [
        "# gnuplot script: dynamical entropy S(J) versus word length J",
        'set datafile separator ","',
        'set xlabel "J"',
        'set ylabel "S(J) [nats]"',
        "set key left top",
        "set grid",
    ]
    plots = []
    if kind in ("single", "multi"):
        for N in sorted({r.N for r in records if r.method != "classical"}):
            plots.append(
                f'"{csv_name}" using 7:($2=={N} ? $8 : 1/0) '
                f'with linespoints title "N={N}"'
            )
            plots.append(f'2*log({N}) with lines dashtype 2 title "2 ln {N}"')
    elif kind == "sweep_v":
        for V in sorted({r.V for r in records if r.method != "classical"}):
            plots.append(
                f'"{csv_name}" using 7:($5=={_fmt_float(V)} ? $8 : 1/0) '
                f'with linespoints title "V={_fmt_float(V)}"'
            )
    elif kind == "sweep_i":
        for I in sorted({r.I for r in records if r.method != "classical"}):
            plots.append(
                f'"{csv_name}" using 7:($4=={I} ? $8 : 1/0) '
                f'with linespoints title "I={I}"'
            )
    if any(r.method == "classical" for r in records):
        plots.append(
            f'"{csv_name}" using 7:(strcol(9) eq "classical" ? $8 : 1/0) '
            'with lines title "classical"'
        )
    lines.append("plot \\")
    lines.append(", \\\n".join("  " + p for p in plots))
    lines.append("pause -1")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_outputs(plan: ExperimentPlan, records, meta, workers: int = 1) -> dict:
    """Persist CSV, plot script and metadata sidecar; returns the paths."""
    os.makedirs(plan.out_dir, exist_ok=True)
    csv_path = os.path.join(plan.out_dir, "results.csv")
    plot_path = os.path.join(plan.out_dir, f"{plan.kind}.gp")
    meta_path = os.path.join(plan.out_dir, "meta.json")
    emit_csv(records, csv_path, bits=plan.bits)
    emit_plot_script(records, plot_path, plan.kind, csv_name="results.csv")
    sidecar = {
        "kind": plan.kind,
        "method": plan.method,
        "heavy": plan.heavy,
        "workers": workers,
        "seed": plan.seed,
        "configs": [c.hash() for c in plan.configs],
        **meta,
    }
    with open(meta_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return {"csv": csv_path, "plot": plot_path, "meta": meta_path}
