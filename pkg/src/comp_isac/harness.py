"""Experiment sweeps, Monte Carlo validation, CSV emission and plots.

The harness turns one scenario into result tables: a detection-
probability validation sweep (closed form vs Monte Carlo under a chosen
allocation) and rate sweeps over the power budget or the detection
threshold comparing allocation schemes. Rows are plain records; CSV is
the contract of record and plots are a convenience layer over it.

Determinism: (config, seed) fully determines every emitted CSV byte.
Sweep points are independent and may run on a thread pool; rows are
always emitted in grid order, so the file does not depend on the worker
count or schedule. Wall-clock timings are kept on the in-memory rows
only and never written to CSV for exactly this reason.

CSV column order (fixed, documented here and in the README):

    sweep_variable, sweep_value, scheme, feasible, sum_rate,
    rate_1..rate_L, pod_closed_1..pod_closed_L,
    [pod_mc_1..pod_mc_L, pod_stderr_1..pod_stderr_L,]  (validation runs)
    iterations

Floats are rendered with nine significant digits; infeasible rate-sweep
rows leave every numeric metric cell empty.
"""

import concurrent.futures
import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import allocator, detection
from .channel import ScenarioConfig, sample_channels, scenario_from_dict
from .errors import ConfigError, InfeasibleError, SamplingExhaustedError

__all__ = [
    "SweepSpec",
    "ResultRow",
    "HarnessConfig",
    "load_config",
    "run_pod_validation",
    "run_rate_sweep",
    "emit_csv",
    "read_results",
    "render_plots",
]

_VARIABLES = ("power_budget_db", "pod_threshold")
_SCHEMES = ("ppa", "epa", "rpa")


@dataclass
class SweepSpec:
    """One sweep: variable, inclusive grid, schemes and sampling policy."""

    variable: str
    start: float
    stop: float
    step: float
    schemes: tuple = _SCHEMES
    trials: int = 10_000
    snapshots: int = 1
    rpa_seed: int = 2
    workers: int = 1

    def __post_init__(self):
        if self.variable not in _VARIABLES:
            raise ConfigError("variable", f"must be one of {_VARIABLES}, got {self.variable!r}")
        self.start = float(self.start)
        self.stop = float(self.stop)
        self.step = float(self.step)
        if not self.step > 0:
            raise ConfigError("step", f"must be > 0, got {self.step}")
        if self.stop < self.start:
            raise ConfigError("stop", f"grid is empty: stop {self.stop} < start {self.start}")
        if isinstance(self.schemes, str):
            self.schemes = (self.schemes,)
        self.schemes = tuple(self.schemes)
        for s in self.schemes:
            if s not in _SCHEMES:
                raise ConfigError("schemes", f"unknown scheme {s!r}")
        if not self.schemes:
            raise ConfigError("schemes", "at least one scheme is required")
        for name in ("trials", "snapshots", "workers"):
            v = getattr(self, name)
            if int(v) != v or int(v) < 1:
                raise ConfigError(name, f"must be a positive integer, got {v}")
            setattr(self, name, int(v))
        self.rpa_seed = int(self.rpa_seed)

    @property
    def grid(self):
        """Inclusive grid start, start+step, ...; stop kept within half a step."""
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass
class ResultRow:
    """One (sweep point, scheme) record; array fields are None when empty."""

    sweep_variable: str
    sweep_value: float
    scheme: str
    feasible: bool
    sum_rate: float = math.nan
    rates: np.ndarray = None
    pod_closed: np.ndarray = None
    pod_mc: np.ndarray = None
    pod_stderr: np.ndarray = None
    iterations: int = 0
    wall_time_s: float = 0.0


def _scenario_at(scenario, variable, value):
    if variable == "power_budget_db":
        return scenario.replace(power_budget_db=float(value))
    return scenario.replace(pod_threshold=float(value))


def _allocate(scheme, scenario, realization, rpa_stream):
    """Run one scheme; returns (AllocationResult or None, iterations)."""
    try:
        if scheme == "ppa":
            res = allocator.optimize_ppa(scenario, realization)
        elif scheme == "epa":
            res = allocator.epa(scenario, realization)
            if not res.feasible:
                return None, 0
        else:
            res = allocator.rpa(scenario, realization, stream=rpa_stream)
    except (InfeasibleError, SamplingExhaustedError):
        return None, 0
    return res, res.outer_iterations


def _rate_point(scenario, spec, value, realizations, point_index):
    """All scheme rows for one sweep point, in spec.schemes order."""
    sc = _scenario_at(scenario, spec.variable, value)
    rows = []
    for scheme in spec.schemes:
        t0 = time.perf_counter()
        results = []
        iters = 0
        for real in realizations:
            stream = np.random.default_rng([spec.rpa_seed, point_index]) if scheme == "rpa" else None
            res, it = _allocate(scheme, sc, real, stream)
            if res is None:
                results = None
                break
            results.append(res)
            iters = max(iters, it)
        if results is None:
            rows.append(
                ResultRow(
                    sweep_variable=spec.variable,
                    sweep_value=float(value),
                    scheme=scheme,
                    feasible=False,
                    wall_time_s=time.perf_counter() - t0,
                )
            )
            continue
        rates = np.mean([r.per_user_rate for r in results], axis=0)
        pods = np.mean([r.per_target_pod for r in results], axis=0)
        rows.append(
            ResultRow(
                sweep_variable=spec.variable,
                sweep_value=float(value),
                scheme=scheme,
                feasible=True,
                sum_rate=float(np.sum(rates)),
                rates=rates,
                pod_closed=pods,
                iterations=iters,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return rows


def _snapshots_for(scenario, count):
    """First snapshot is the scenario's canonical draw; extras use derived streams."""
    streams = [None] + [np.random.default_rng([scenario.seed, j]) for j in range(1, count)]
    return [sample_channels(scenario, s) for s in streams]


def run_rate_sweep(scenario, spec):
    """Sum-rate sweep rows over ``spec.grid`` for every scheme and snapshot.

    The channel snapshot set is drawn once and reused at every grid
    point, so trends along the sweep are "along a fixed snapshot" as the
    scheme comparisons require. A point/scheme pair is feasible only if
    every snapshot is; metrics are snapshot averages. Points execute on
    a thread pool of ``spec.workers``; emission order is grid order.
    """
    realizations = _snapshots_for(scenario, spec.snapshots)
    grid = spec.grid
    if spec.workers == 1:
        per_point = [_rate_point(scenario, spec, v, realizations, k) for k, v in enumerate(grid)]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=spec.workers) as pool:
            per_point = list(
                pool.map(
                    lambda kv: _rate_point(scenario, spec, kv[1], realizations, kv[0]),
                    enumerate(grid),
                )
            )
    return [row for rows in per_point for row in rows]


def run_pod_validation(scenario, spec=None):
    """Closed-form vs Monte Carlo detection probability along a budget grid.

    For each grid point and scheme (default: equal power only, the
    validation setting) the scheme's allocation is computed on the
    canonical snapshot, the closed-form per-target PoD recorded, and an
    empirical PoD estimated from ``spec.trials`` Monte Carlo experiments
    with binomial standard errors. Monte Carlo substreams are keyed by
    (scheme index, point index, target), so rows are schedule
    independent. Rows keep their values even when the allocation
    violates a constraint; the feasible flag reports that honestly.
    """
    if spec is None:
        spec = SweepSpec("power_budget_db", 4.0, 14.0, 2.0, schemes=("epa",))
    realization = sample_channels(scenario)
    rows = []

    def point_rows(k, value):
        sc = _scenario_at(scenario, spec.variable, value)
        out = []
        for s_idx, scheme in enumerate(spec.schemes):
            t0 = time.perf_counter()
            stream = np.random.default_rng([spec.rpa_seed, k]) if scheme == "rpa" else None
            if scheme == "epa":
                res = allocator.epa(sc, realization)
            else:
                res, _ = _allocate(scheme, sc, realization, stream)
            if res is None:
                out.append(
                    ResultRow(spec.variable, float(value), scheme, False,
                              wall_time_s=time.perf_counter() - t0)
                )
                continue
            mc = np.empty(sc.L)
            se = np.empty(sc.L)
            for i in range(sc.L):
                setup = detection.DetectionSetup.from_scenario(sc, target=i)
                sim = detection.simulate_detection(
                    setup,
                    res.P,
                    realization,
                    i,
                    spec.trials,
                    np.random.SeedSequence(scenario.seed, spawn_key=(7, s_idx, k, i)),
                )
                mc[i] = sim.pod_hat
                se[i] = sim.stderr[1]
            out.append(
                ResultRow(
                    sweep_variable=spec.variable,
                    sweep_value=float(value),
                    scheme=scheme,
                    feasible=res.feasible,
                    sum_rate=res.sum_rate,
                    rates=res.per_user_rate,
                    pod_closed=res.per_target_pod,
                    pod_mc=mc,
                    pod_stderr=se,
                    iterations=res.outer_iterations,
                    wall_time_s=time.perf_counter() - t0,
                )
            )
        return out

    grid = spec.grid
    if spec.workers == 1:
        per_point = [point_rows(k, v) for k, v in enumerate(grid)]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=spec.workers) as pool:
            per_point = list(pool.map(lambda kv: point_rows(kv[0], kv[1]), enumerate(grid)))
    for chunk in per_point:
        rows.extend(chunk)
    return rows


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".9g")


def emit_csv(rows, path):
    """Write rows to ``path`` in the documented fixed column order.

    Per-user and per-target column blocks are sized from the first row
    that carries arrays; Monte Carlo columns appear only when some row
    has them. An empty row list produces a header-only file with the
    scalar columns. Identical rows always produce identical bytes.
    """
    L = 0
    for row in rows:
        if row.rates is not None:
            L = len(row.rates)
            break
    has_mc = any(row.pod_mc is not None for row in rows)
    header = ["sweep_variable", "sweep_value", "scheme", "feasible", "sum_rate"]
    header += [f"rate_{i + 1}" for i in range(L)]
    header += [f"pod_closed_{i + 1}" for i in range(L)]
    if has_mc:
        header += [f"pod_mc_{i + 1}" for i in range(L)]
        header += [f"pod_stderr_{i + 1}" for i in range(L)]
    header.append("iterations")
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                cells = [
                    row.sweep_variable,
                    _fmt(row.sweep_value),
                    row.scheme,
                    "true" if row.feasible else "false",
                    _fmt(row.sum_rate),
                ]
                for block in (row.rates, row.pod_closed):
                    vals = [""] * L if block is None else [_fmt(v) for v in block]
                    cells += vals
                if has_mc:
                    for block in (row.pod_mc, row.pod_stderr):
                        vals = [""] * L if block is None else [_fmt(v) for v in block]
                        cells += vals
                cells.append(str(row.iterations) if row.feasible else "")
                writer.writerow(cells)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot write CSV: {exc}") from exc


def _parse_block(record, header, prefix, lineno, path):
    names = [h for h in header if h.startswith(prefix)]
    if not names:
        return None
    vals = [record[h] for h in names]
    if all(v == "" for v in vals):
        return None
    try:
        return np.array([float(v) for v in vals])
    except ValueError as exc:
        raise ConfigError(f"{path}:{lineno}", f"bad float in columns {prefix}*: {exc}") from exc


def read_results(path):
    """Parse a file produced by emit_csv back into ResultRow records.

    Malformed lines are reported by file and line number.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ConfigError(str(path), "empty file, expected a CSV header")
            header = reader.fieldnames
            required = ["sweep_variable", "sweep_value", "scheme", "feasible", "sum_rate"]
            for name in required:
                if name not in header:
                    raise ConfigError(str(path), f"missing column {name!r}")
            rows = []
            for record in reader:
                lineno = reader.line_num
                if None in record or any(v is None for v in record.values()):
                    raise ConfigError(f"{path}:{lineno}", "wrong number of fields")
                try:
                    feasible = {"true": True, "false": False}[record["feasible"]]
                except KeyError as exc:
                    raise ConfigError(
                        f"{path}:{lineno}", f"feasible must be true/false, got {record['feasible']!r}"
                    ) from exc
                try:
                    value = float(record["sweep_value"])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}", f"bad sweep_value: {exc}") from exc
                sum_rate = float(record["sum_rate"]) if record["sum_rate"] else math.nan
                iters = record.get("iterations", "")
                rows.append(
                    ResultRow(
                        sweep_variable=record["sweep_variable"],
                        sweep_value=value,
                        scheme=record["scheme"],
                        feasible=feasible,
                        sum_rate=sum_rate,
                        rates=_parse_block(record, header, "rate_", lineno, path),
                        pod_closed=_parse_block(record, header, "pod_closed_", lineno, path),
                        pod_mc=_parse_block(record, header, "pod_mc_", lineno, path),
                        pod_stderr=_parse_block(record, header, "pod_stderr_", lineno, path),
                        iterations=int(iters) if iters else 0,
                    )
                )
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read CSV: {exc}") from exc
    return rows


_AXIS_LABELS = {
    "power_budget_db": "power budget (dB)",
    "pod_threshold": "detection probability threshold",
}


def render_plots(csv_path, out_dir):
    """Render one SVG per sweep file; returns the list of written paths.

    Validation files (Monte Carlo columns present) plot closed-form
    curves with empirical points and error bars per target. Rate files
    plot sum rate with one series per scheme present; infeasible points
    are omitted from their series.
    """
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.fonttype"] = "none"  # keep labels as searchable text
    import matplotlib.pyplot as plt
    from pathlib import Path

    rows = read_results(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(csv_path).stem
    target = out_dir / f"{stem}.svg"
    xlabel = _AXIS_LABELS.get(rows[0].sweep_variable, rows[0].sweep_variable) if rows else "sweep value"
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    has_mc = any(r.pod_mc is not None for r in rows)
    if has_mc:
        L = len(next(r.pod_closed for r in rows if r.pod_closed is not None))
        xs = [r.sweep_value for r in rows if r.pod_closed is not None]
        for i in range(L):
            closed = [r.pod_closed[i] for r in rows if r.pod_closed is not None]
            ax.plot(xs, closed, "-", label=f"target {i + 1} closed form")
        for i in range(L):
            pts = [(r.sweep_value, r.pod_mc[i], r.pod_stderr[i]) for r in rows if r.pod_mc is not None]
            ax.errorbar(
                [p[0] for p in pts],
                [p[1] for p in pts],
                yerr=[3 * p[2] for p in pts],
                fmt="o",
                markersize=4,
                capsize=3,
                label=f"target {i + 1} Monte Carlo",
            )
        ax.set_ylabel("probability of detection")
    else:
        schemes = []
        for r in rows:
            if r.scheme not in schemes:
                schemes.append(r.scheme)
        for scheme in schemes:
            pts = [(r.sweep_value, r.sum_rate) for r in rows if r.scheme == scheme and r.feasible]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", markersize=4, label=scheme)
        ax.set_ylabel("sum rate (bit/s/Hz)")
    ax.set_xlabel(xlabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(target, format="svg")
    plt.close(fig)
    return [target]


_DEFAULT_SWEEPS = {
    "budget": dict(variable="power_budget_db", start=8.0, stop=20.0, step=1.0),
    "pod": dict(variable="pod_threshold", start=0.1, stop=0.9, step=0.1),
    "pod_validation": dict(
        variable="power_budget_db", start=4.0, stop=14.0, step=2.0, schemes=("epa",)
    ),
}
_SWEEP_SHARED_KEYS = ("schemes", "trials", "snapshots", "workers", "rpa_seed")
_SWEEP_GRID_KEYS = ("start", "stop", "step") + _SWEEP_SHARED_KEYS


@dataclass
class HarnessConfig:
    """Scenario plus the three named sweeps (budget, pod, pod_validation)."""

    scenario: ScenarioConfig
    sweeps: dict = field(default_factory=dict)


def load_config(path=None):
    """Load scenario and sweep settings from a YAML file.

    Structure: a ``scenario`` mapping (see ScenarioConfig for keys) and
    a ``sweep`` mapping with optional per-sweep blocks ``budget``,
    ``pod`` and ``pod_validation`` (keys start/stop/step plus the shared
    keys) and shared defaults ``schemes``, ``trials``, ``snapshots``,
    ``workers``, ``rpa_seed`` applied to every sweep. Unknown keys are
    rejected by name. With no path, all defaults apply.
    """
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(str(path), f"invalid YAML: {exc}") from exc
        if data is None:
            data = {}
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level of the config must be a mapping")
    unknown = sorted(set(data) - {"scenario", "sweep"})
    if unknown:
        raise ConfigError(unknown[0], "unknown top-level config key")
    scenario = scenario_from_dict(data.get("scenario") or {})
    sweep_block = data.get("sweep") or {}
    if not isinstance(sweep_block, dict):
        raise ConfigError("sweep", "expected a mapping")
    unknown = sorted(set(sweep_block) - set(_DEFAULT_SWEEPS) - set(_SWEEP_SHARED_KEYS))
    if unknown:
        raise ConfigError(unknown[0], "unknown sweep key")
    shared = {k: sweep_block[k] for k in _SWEEP_SHARED_KEYS if k in sweep_block}
    sweeps = {}
    for name, defaults in _DEFAULT_SWEEPS.items():
        block = sweep_block.get(name) or {}
        if not isinstance(block, dict):
            raise ConfigError(name, "expected a mapping of sweep settings")
        unknown = sorted(set(block) - set(_SWEEP_GRID_KEYS))
        if unknown:
            raise ConfigError(unknown[0], f"unknown key in sweep.{name}")
        merged = dict(defaults)
        for k, v in shared.items():
            merged[k] = v
        merged.update(block)
        if isinstance(merged.get("schemes"), list):
            merged["schemes"] = tuple(merged["schemes"])
        sweeps[name] = SweepSpec(**merged)
    return HarnessConfig(scenario=scenario, sweeps=sweeps)
