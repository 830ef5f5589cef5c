"""Batch experiments over random channel realizations.

Every experiment writes ``<out>/<name>.csv`` with the columns
``experiment,solver,sweep_var,sweep_value,metric,mean,stderr,R,seed`` and a
JSON sidecar holding the full configuration and a git-style hash of the
deterministic rows.  Metrics ending in ``_s`` are wall-clock timings; they are
excluded from the hash and from determinism checks.

Channels depend only on ``(seed, realization, N, N_I)`` so all solvers and
all transmit powers in a sweep see identical channels.  Solver randomness is
keyed additionally by the solver name and the sweep point.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from . import baselines as bl
from . import ssa
from .egd import EgdConfig, SinrSurrogate, ag_line_search, aligned_phases, egd_solve, project_box
from .errors import DomainError
from .overhead import OverheadModel, active_count, ee, ee_loss, max_elements, rate, rate_loss
from .reformulation import BINARY
from .scenario import ScenarioConfig, build_problem, capacity, gen_rician, realization_rng

EXPERIMENTS = ("capacity_vs_N", "runtime_vs_N", "ee_vs_p", "rate_vs_p", "element_count_table")
SINR_SOLVERS = ("E-GD-1", "E-GD-2", "SSA-B", "CPP-1", "CPP-2", "SA", "EXH")
OVERHEAD_SOLVERS = ("SSA-T", "UA")
BENCH_SOLVERS = ("E-GD-1", "E-GD-2", "SSA-B", "CPP-1", "CPP-2", "SA")
COLUMNS = ("experiment", "solver", "sweep_var", "sweep_value", "metric", "mean", "stderr", "R", "seed")
MIN_REPS = 30
WARMUP = 3

_SWEEP_VARS = {
    "capacity_vs_N": ("N",),
    "runtime_vs_N": ("N",),
    "ee_vs_p": ("p_dBm",),
    "rate_vs_p": ("p_dBm",),
    "element_count_table": ("p_dBm", "T0_ms"),
}
_DEFAULT_SOLVERS = {
    "capacity_vs_N": ("E-GD-1", "E-GD-2", "SSA-B", "CPP-1", "CPP-2", "SA"),
    "runtime_vs_N": ("E-GD-1", "E-GD-2"),
    "ee_vs_p": OVERHEAD_SOLVERS,
    "rate_vs_p": OVERHEAD_SOLVERS,
    "element_count_table": OVERHEAD_SOLVERS,
}


@dataclass
class ExperimentSpec:
    experiment: str
    sweep: dict
    realizations: int = 1000
    seed: int = 0
    solvers: list = field(default_factory=list)
    scenario: dict = field(default_factory=dict)
    overhead: dict = field(default_factory=dict)
    egd: dict = field(default_factory=dict)
    ssa_b: dict = field(default_factory=dict)
    ssa_t: dict = field(default_factory=dict)
    reps: int = MIN_REPS
    out: str = "results"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.realizations < 1:
            raise DomainError("realizations must be >= 1")
        expected = set(_SWEEP_VARS[self.experiment])
        if set(self.sweep) != expected:
            raise DomainError(f"{self.experiment} sweeps {sorted(expected)}, got {sorted(self.sweep)}")
        for k, v in self.sweep.items():
            if not isinstance(v, (list, tuple)) or len(v) == 0:
                raise DomainError(f"sweep values for {k} must be a non-empty list")
        if not self.solvers:
            self.solvers = list(_DEFAULT_SOLVERS[self.experiment])
        allowed = OVERHEAD_SOLVERS if self.experiment in ("ee_vs_p", "rate_vs_p", "element_count_table") else SINR_SOLVERS
        bad = [s for s in self.solvers if s not in allowed]
        if bad:
            raise DomainError(f"solvers {bad} not available for {self.experiment}")
        if self.reps < MIN_REPS:
            raise DomainError(f"reps must be >= {MIN_REPS}")
        # fail early on bad nested configs
        ScenarioConfig.from_dict(self.scenario)
        OverheadModel.from_dict(self.overhead)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunResult:
    rows: list
    failures: int
    csv_path: Path | None = None
    json_path: Path | None = None


# ---------------------------------------------------------------------------
# Aggregation and output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    # shortest round-trip representation, stable across runs
    return repr(float(x))


def summarize(values) -> tuple[float, float, int]:
    """Mean, sample-stdev / sqrt(R), and R over the finite entries."""
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    R = v.size
    if R == 0:
        return float("nan"), float("nan"), 0
    se = float(np.std(v, ddof=1) / np.sqrt(R)) if R > 1 else float("nan")
    return float(v.mean()), se, R


def is_timing(metric: str) -> bool:
    return metric.endswith("_s")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) if c in ("mean", "stderr", "R", "seed") else r[c] for c in COLUMNS])
    return buf.getvalue()


def content_hash(rows) -> str:
    """Git blob SHA-1 of the CSV restricted to non-timing rows."""
    data = rows_to_csv([r for r in rows if not is_timing(r["metric"])]).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def write_outputs(spec: ExperimentSpec, rows, name: str, extra: dict | None = None) -> tuple[Path, Path]:
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.json"
    csv_path.write_text(rows_to_csv(rows), encoding="utf-8")
    # the output location is left out so reruns elsewhere compare equal
    cfg = {k: v for k, v in spec.to_dict().items() if k != "out"}
    meta = {"spec": cfg, "columns": list(COLUMNS), "content_hash": content_hash(rows)}
    if extra:
        meta.update(extra)
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path


def _row(spec, solver, var, value, metric, values):
    mean, se, R = summarize(values)
    return {
        "experiment": spec.experiment,
        "solver": solver,
        "sweep_var": var,
        "sweep_value": value,
        "metric": metric,
        "mean": mean,
        "stderr": se,
        "R": R,
        "seed": spec.seed,
    }


def _sweep_label(v) -> str:
    return _fmt(v) if isinstance(v, (int, float, np.number)) else str(v)


# ---------------------------------------------------------------------------
# Seeds and channels
# ---------------------------------------------------------------------------


def channel_for(spec_seed: int, index: int, cfg: ScenarioConfig):
    rng = realization_rng(spec_seed, index, "channel", f"N={cfg.N}", f"NI={cfg.N_I}")
    return gen_rician(cfg, rng)


def solver_rng(spec_seed: int, index: int, solver: str, point: str):
    return realization_rng(spec_seed, index, solver, point)


# ---------------------------------------------------------------------------
# SINR experiments
# ---------------------------------------------------------------------------


def solve_sinr(solver: str, prob, ch, spec: ExperimentSpec, rng) -> float:
    """Run one solver on one instance; returns the achieved SINR."""
    if solver in ("E-GD-1", "E-GD-2"):
        cfg = EgdConfig(**{**spec.egd, "order": int(solver[-1])})
        return egd_solve(prob, ch, cfg, rng).sinr
    if solver == "SSA-B":
        return ssa.ssa_b_solve(prob, ssa.SSA_B_DEFAULTS.replace(**spec.ssa_b), rng).sinr
    if solver == "CPP-1":
        return bl.cpp1(ch, EgdConfig(**spec.egd), prob=prob).sinr
    if solver == "CPP-2":
        return bl.cpp2(prob, ch, EgdConfig(**spec.egd)).sinr
    if solver == "SA":
        return float(prob.ratio(bl.sa_project(ch)))
    if solver == "EXH":
        return bl.exhaustive(prob.ratio, BINARY, prob.N)[1]
    raise DomainError(f"unknown solver {solver!r}")


def run_capacity(spec: ExperimentSpec):
    rows, failures = [], 0
    base = ScenarioConfig.from_dict(spec.scenario)
    for N in spec.sweep["N"]:
        cfg = base.replace(N=int(N))
        point = f"N={int(N)}"
        caps = {s: [] for s in spec.solvers}
        for i in range(spec.realizations):
            ch = channel_for(spec.seed, i, cfg)
            prob = build_problem(ch)
            for s in spec.solvers:
                try:
                    caps[s].append(capacity(solve_sinr(s, prob, ch, spec, solver_rng(spec.seed, i, s, point))))
                except Exception:
                    failures += 1
                    caps[s].append(float("nan"))
        for s in spec.solvers:
            rows.append(_row(spec, s, "N", _sweep_label(int(N)), "capacity_bps_per_Hz", caps[s]))
    return rows, failures, {}


# ---------------------------------------------------------------------------
# Per-iteration timing
# ---------------------------------------------------------------------------


def iteration_closures(solver: str, prob, ch, spec: ExperimentSpec, rng) -> tuple[Callable, Callable | None]:
    """``(iteration, gradient)`` callables for one solver at its starting point.

    ``iteration`` performs one gradient evaluation, line search or update,
    and projection; ``gradient`` only the gradient (None where not separable).
    """
    cfg = EgdConfig(**spec.egd)
    if solver in ("E-GD-1", "E-GD-2"):
        order = int(solver[-1])
        sur = SinrSurrogate(prob)
        y = cfg.init_scale * bl.sa_project(ch)

        def neg(v):
            return -sur.value(v, order)

        def grad():
            return sur.grad(y, order)

        def step():
            g = sur.grad(y, order)
            b = ag_line_search(y, -g, neg, cfg)
            return project_box(y + b * g)

        return step, grad
    if solver == "CPP-2":
        y = cfg.init_scale * bl.sa_project(ch)

        def grad():
            return bl.grad_relaxed_ratio(prob, y)

        def step():
            g = grad()
            b = ag_line_search(y, -g, lambda v: -bl.relaxed_ratio(prob, v), cfg)
            return project_box(y + b * g)

        return step, grad
    if solver == "CPP-1":
        phi = aligned_phases(ch)

        def grad():
            return bl.grad_phase_sinr(phi, ch)

        def step():
            g = grad()
            b = ag_line_search(phi, -g, lambda v: -bl.phase_sinr(v, ch), cfg, project=lambda v: v)
            return phi + b * g

        return step, grad
    if solver == "SSA-B":
        scfg = ssa.SSA_B_DEFAULTS.replace(**spec.ssa_b)
        params = ssa.BinaryProbs(np.full(prob.N, 0.5))

        def loss(theta):
            return -prob.ratio(theta)

        def grad():
            return ssa.estimate_gradient(loss, params, "p", scfg, rng)[0]

        def step():
            return ssa.project_block(params.p - scfg.beta_s * grad(), None, scfg.delta)

        return step, grad
    if solver == "SA":
        return (lambda: bl.sa_project(ch)), None
    raise DomainError(f"solver {solver!r} has no iteration benchmark")


def _median_time(fn: Callable, reps: int) -> float:
    for _ in range(WARMUP):
        fn()
    ts = np.empty(reps)
    for k in range(reps):
        t0 = time.perf_counter()
        fn()
        ts[k] = time.perf_counter() - t0
    return float(np.median(ts))


def loglog_slope(Ns, times) -> float:
    return float(np.polyfit(np.log(np.asarray(Ns, float)), np.log(np.asarray(times, float)), 1)[0])


def run_bench(spec: ExperimentSpec, solvers=None):
    """Median per-iteration (and per-gradient) wall time per solver and N."""
    solvers = [s for s in (solvers or spec.solvers) if s != "EXH"]
    bad = [s for s in solvers if s not in BENCH_SOLVERS]
    if bad:
        raise DomainError(f"no iteration benchmark for {bad}")
    rows, failures = [], 0
    base = ScenarioConfig.from_dict(spec.scenario)
    Ns = [int(N) for N in spec.sweep["N"]]
    grad_means = {s: [] for s in solvers}
    for N in Ns:
        cfg = base.replace(N=N)
        point = f"N={N}"
        it_t = {s: [] for s in solvers}
        gr_t = {s: [] for s in solvers}
        for i in range(spec.realizations):
            ch = channel_for(spec.seed, i, cfg)
            prob = build_problem(ch)
            for s in solvers:
                try:
                    step, grad = iteration_closures(s, prob, ch, spec, solver_rng(spec.seed, i, s, point))
                    it_t[s].append(_median_time(step, spec.reps))
                    if grad is not None:
                        gr_t[s].append(_median_time(grad, spec.reps))
                except Exception:
                    failures += 1
        for s in solvers:
            rows.append(_row(spec, s, "N", _sweep_label(N), "iter_time_s", it_t[s]))
            if gr_t[s]:
                rows.append(_row(spec, s, "N", _sweep_label(N), "grad_time_s", gr_t[s]))
                grad_means[s].append(float(np.mean(gr_t[s])))
    slopes = {s: loglog_slope(Ns, v) for s, v in grad_means.items() if len(v) == len(Ns) and len(Ns) > 1}
    return rows, failures, {"grad_time_loglog_slope": slopes}


# ---------------------------------------------------------------------------
# Overhead-aware experiments
# ---------------------------------------------------------------------------


def solve_overhead(solver: str, ch, model: OverheadModel, objective: str, spec: ExperimentSpec, rng) -> np.ndarray:
    """Ternary configuration chosen by ``solver`` for the rate or EE objective."""
    if solver == "UA":
        return bl.ua(ch, model, objective=objective).theta
    if solver == "SSA-T":
        defaults = ssa.EE_DEFAULTS if objective == "ee" else ssa.RATE_DEFAULTS
        J = ee_loss(ch, model) if objective == "ee" else rate_loss(ch, model)
        return ssa.ssa_t_bcd(J, ch.N, defaults.replace(**spec.ssa_t), rng).theta
    raise DomainError(f"unknown solver {solver!r}")


def _overhead_point(spec, p_dBm, T0_ms, objective, point):
    model = OverheadModel.from_dict({**spec.overhead, "p_dBm": p_dBm, "T0_ms": T0_ms})
    N, ok = max_elements(model)
    if not ok or N < 1:
        raise DomainError(f"no RIS element fits in the slot at {point}")
    cfg = ScenarioConfig.from_dict(spec.scenario).replace(N=N, p_dBm=p_dBm)
    values = {s: [] for s in spec.solvers}
    counts = {s: [] for s in spec.solvers}
    failures = 0
    fn = ee if objective == "ee" else rate
    for i in range(spec.realizations):
        ch = channel_for(spec.seed, i, cfg)
        for s in spec.solvers:
            try:
                theta = solve_overhead(s, ch, model, objective, spec, solver_rng(spec.seed, i, s, point))
                values[s].append(float(fn(theta, ch, model)) / 1e6)
                counts[s].append(float(active_count(theta)))
            except Exception:
                failures += 1
                values[s].append(float("nan"))
                counts[s].append(float("nan"))
    return values, counts, failures


def run_overhead(spec: ExperimentSpec):
    objective = "ee" if spec.experiment == "ee_vs_p" else "rate"
    metric = "ee_Mbit_per_J" if objective == "ee" else "rate_Mbit_per_s"
    T0 = OverheadModel.from_dict(spec.overhead).T0_ms
    rows, failures = [], 0
    for p in spec.sweep["p_dBm"]:
        point = f"p={_sweep_label(p)}"
        values, _, f = _overhead_point(spec, float(p), T0, objective, point)
        failures += f
        for s in spec.solvers:
            rows.append(_row(spec, s, "p_dBm", _sweep_label(p), metric, values[s]))
    return rows, failures, {}


def run_element_table(spec: ExperimentSpec):
    rows, failures = [], 0
    for T0 in spec.sweep["T0_ms"]:
        for p in spec.sweep["p_dBm"]:
            label = f"{_sweep_label(p)};{_sweep_label(T0)}"
            point = f"p={_sweep_label(p)};T0={_sweep_label(T0)}"
            _, counts, f = _overhead_point(spec, float(p), float(T0), "ee", point)
            failures += f
            for s in spec.solvers:
                rows.append(_row(spec, s, "p_dBm;T0_ms", label, "active_elements", counts[s]))
    return rows, failures, {}


_RUNNERS = {
    "capacity_vs_N": run_capacity,
    "runtime_vs_N": run_bench,
    "ee_vs_p": run_overhead,
    "rate_vs_p": run_overhead,
    "element_count_table": run_element_table,
}


def run(spec: ExperimentSpec, *, write: bool = True) -> RunResult:
    rows, failures, extra = _RUNNERS[spec.experiment](spec)
    res = RunResult(rows, failures)
    if write:
        res.csv_path, res.json_path = write_outputs(spec, rows, spec.experiment, {**extra, "failures": failures})
    return res


def bench(spec: ExperimentSpec, *, write: bool = True) -> RunResult:
    """Per-iteration timings over the spec's ``N`` sweep, whatever its experiment id."""
    if "N" not in spec.sweep:
        raise DomainError("bench needs an N sweep")
    rows, failures, extra = run_bench(spec)
    for r in rows:
        r["experiment"] = "bench"
    res = RunResult(rows, failures)
    if write:
        res.csv_path, res.json_path = write_outputs(spec, rows, "bench", {**extra, "failures": failures})
    return res
