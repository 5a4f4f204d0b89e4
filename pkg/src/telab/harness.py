"""Batch experiment harness: calibration, sweeps, and result emission.

A sweep runs every (model, policy, scale) combination of its config, solving
each point independently and recording one result row per point.  A failed
solve is data, not an abort: the row carries the failure status and the sweep
continues.  Rows are merged in sorted coordinate order, so reruns with the
same config and seed produce identical CSV content apart from the timing
columns.  Path precomputation is shared across points through a cache since
it is a one-time operation, while per-point LP build and solve times are
reported separately (only solve time is a solution-quality metric).
"""
from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import __version__
from .demands import TrafficMatrix, LognormalFit, generate_lognormal_tm, load_tm, scale_tm
from .errors import ValidationError
from .lpcore import OPTIMAL, solve
from .metrics import METRIC_COLUMNS, MetricsReport, compute_metrics
from .temodels import (
    CAPACITY_MODE_ALL,
    build_ffc_lp,
    build_te_lp,
    extract_solution,
    solution_to_dict,
    verify_congestion_free,
)
from .topology import Topology, load_topology, scale_capacities
from .tunnels import (
    KspCache,
    ScenarioSet,
    build_tunnel_sets,
    enumerate_single_link_scenarios,
    parse_policy,
)

log = logging.getLogger(__name__)

MODELS = ("te", "ffc")

RESULT_COLUMNS = [
    "model",
    "policy",
    "scale",
    "seed",
    "backend",
    "capacity_mode",
    "status",
    "objective",
    "variables",
    "constraints",
    "build_time",
    *METRIC_COLUMNS,
    "congestion_free",
]

# Wall-clock columns excluded from reproducibility comparisons.
TIMING_COLUMNS = ("build_time", "solver_time")


@dataclass
class ExperimentConfig:
    topology: str
    tm: str | None = None
    fit: LognormalFit | None = None
    seed: int = 0
    scales: list[float] = field(default_factory=lambda: [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0])
    models: list[str] = field(default_factory=lambda: ["te", "ffc"])
    policies: list[str] = field(default_factory=lambda: ["fixed:5", "adaptive"])
    backend: str = "bundled"
    capacity_mode: str = CAPACITY_MODE_ALL
    capacity_scale: float = 1.0
    out_dir: str | None = None
    workers: int = 1

    def validate(self) -> None:
        if not self.models or any(m not in MODELS for m in self.models):
            raise ValidationError(f"models must be a nonempty subset of {MODELS}")
        if not self.policies:
            raise ValidationError("at least one tunnel policy is required")
        for p in self.policies:
            parse_policy(p)
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValidationError("scales must be positive")
        if self.tm is None and self.fit is None:
            raise ValidationError("config needs a tm path or a lognormal fit")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed experiment config: {e}") from e
        fit = None
        if "fit" in doc:
            f = doc["fit"]
            fit = LognormalFit(float(f["mu"]), float(f["sigma"]), int(f.get("n_samples", 0)))
        known = {
            "topology", "tm", "seed", "scales", "models", "policies",
            "backend", "capacity_mode", "capacity_scale", "out_dir", "workers",
        }
        kwargs = {k: doc[k] for k in known if k in doc}
        if "topology" not in kwargs:
            raise ValidationError("experiment config needs a 'topology' path")
        cfg = cls(fit=fit, **kwargs)
        cfg.validate()
        return cfg

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        if self.fit is not None:
            doc["fit"] = {"mu": self.fit.mu, "sigma": self.fit.sigma,
                          "n_samples": self.fit.n_samples}
        return doc


@dataclass
class ResultRow:
    model: str
    policy: str
    scale: float
    seed: int
    backend: str
    capacity_mode: str
    status: str
    objective: float
    variables: int
    constraints: int
    build_time: float
    metrics: MetricsReport | None
    congestion_free: str  # "pass" | "fail" | "" (base TE rows)

    def as_record(self) -> dict:
        rec = {
            "model": self.model,
            "policy": self.policy,
            "scale": self.scale,
            "seed": self.seed,
            "backend": self.backend,
            "capacity_mode": self.capacity_mode,
            "status": self.status,
            "objective": self.objective,
            "variables": self.variables,
            "constraints": self.constraints,
            "build_time": self.build_time,
            "congestion_free": self.congestion_free,
        }
        if self.metrics is not None:
            for col in METRIC_COLUMNS:
                rec[col] = float(getattr(self.metrics, col))
        else:
            for col in METRIC_COLUMNS:
                rec[col] = ""
        return rec


def calibrate_capacities(topo: Topology, tm: TrafficMatrix, ts, *,
                         backend: str = "bundled", rel_precision: float = 1e-3) -> float:
    """Minimal uniform capacity factor delivering all routable demand.

    Binary search to the requested relative precision, doubling upward from
    1.0 until feasible.  Demands with no tunnels cannot be delivered at any
    capacity; they are excluded from the target volume (and reported via the
    tunnel set's ``unroutable`` list).
    """
    routable_total = sum(
        d.volume for d in tm.demands if ts.by_demand[d.id]
    )
    if routable_total <= 0:
        return 1.0

    def satisfied(factor: float) -> bool:
        model = build_te_lp(scale_capacities(topo, factor), tm, ts)
        lp_sol = solve(model.problem, backend)
        if lp_sol.status != OPTIMAL:
            return False
        return routable_total - lp_sol.objective <= 1e-6 * routable_total

    hi = 1.0
    doublings = 0
    while not satisfied(hi):
        hi *= 2.0
        doublings += 1
        if doublings > 60:
            raise ValidationError("calibration diverged: demand unreachable at any capacity")
    lo = hi / 2.0 if doublings else 0.0
    if lo == 0.0:
        # Already feasible at 1.0; bracket downward before bisecting.
        lo = hi / 2.0
        while satisfied(lo):
            hi = lo
            lo /= 2.0
            if lo < 1e-9:
                return hi
    while (hi - lo) > rel_precision * hi:
        mid = (lo + hi) / 2.0
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _solve_point(
    topo: Topology,
    tm_scaled: TrafficMatrix,
    ts,
    scen: ScenarioSet | None,
    model_kind: str,
    capacity_mode: str,
    backend: str,
    scale: float,
    seed: int,
    capacity_scale: float = 1.0,
) -> tuple[ResultRow, dict | None]:
    t0 = time.perf_counter()
    if model_kind == "te":
        model = build_te_lp(topo, tm_scaled, ts)
    else:
        model = build_ffc_lp(topo, tm_scaled, ts, scen, capacity_mode)
    build_time = time.perf_counter() - t0

    lp_sol = solve(model.problem, backend)
    base = dict(
        model=model_kind,
        policy=ts.policy,
        scale=scale,
        seed=seed,
        backend=backend,
        capacity_mode=capacity_mode if model_kind == "ffc" else "",
        variables=model.meta.n_vars,
        constraints=model.meta.n_constraints,
        build_time=build_time,
    )
    if lp_sol.status != OPTIMAL:
        row = ResultRow(status=lp_sol.status, objective=float("nan"),
                        metrics=None, congestion_free="", **base)
        return row, None

    sol = extract_solution(lp_sol, model)
    verdict = ""
    if model_kind == "ffc":
        report = verify_congestion_free(sol, ts, scen, topo)
        verdict = "pass" if report.ok else "fail"
    report_metrics = compute_metrics(sol, tm_scaled, ts, topo)
    row = ResultRow(status=lp_sol.status, objective=lp_sol.objective,
                    metrics=report_metrics, congestion_free=verdict, **base)
    dump = solution_to_dict(sol, model, scale=scale, seed=seed, backend=backend,
                            capacity_scale=capacity_scale)
    return row, dump


def run_experiment(cfg: ExperimentConfig):
    """Execute the sweep; returns rows and writes artifacts when configured."""
    cfg.validate()
    topo = load_topology(cfg.topology)
    if cfg.capacity_scale != 1.0:
        topo = scale_capacities(topo, cfg.capacity_scale)
    if cfg.tm is not None:
        tm = load_tm(cfg.tm, topo)
    else:
        tm = generate_lognormal_tm(topo, cfg.fit, cfg.seed)

    scen = enumerate_single_link_scenarios(topo) if "ffc" in cfg.models else None
    cache = KspCache(topo)

    points = sorted(
        (model, policy, scale)
        for model in cfg.models
        for policy in cfg.policies
        for scale in cfg.scales
    )
    tasks = []
    for model_kind, policy_label, scale in points:
        tm_scaled = scale_tm(tm, scale)
        ts = build_tunnel_sets(topo, tm_scaled, parse_policy(policy_label), cache)
        tasks.append((topo, tm_scaled, ts, scen, model_kind,
                      cfg.capacity_mode, cfg.backend, scale, cfg.seed, cfg.capacity_scale))

    results: list[tuple[ResultRow, dict | None]] = []
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_solve_point_star, tasks))
    else:
        for task in tasks:
            log.info("solving %s %s scale=%s", task[4], task[2].policy, task[7])
            results.append(_solve_point(*task))

    rows = [r for r, _ in results]
    dumps = [d for _, d in results]
    if cfg.out_dir:
        _write_artifacts(cfg, rows, dumps)
    return rows


def _solve_point_star(task):
    return _solve_point(*task)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        rec = row.as_record()
        writer.writerow([_format_cell(rec[col]) for col in RESULT_COLUMNS])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_artifacts(cfg: ExperimentConfig, rows: list[ResultRow],
                     dumps: list[dict | None]) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "results.csv", rows_to_csv(rows))
    _atomic_write(out / "results.json",
                  json.dumps([r.as_record() for r in rows], indent=2))
    config_doc = cfg.to_json_dict()
    manifest = {
        "seed": cfg.seed,
        "config": config_doc,
        "config_hash": hashlib.sha256(
            json.dumps(config_doc, sort_keys=True).encode()).hexdigest(),
        "version": __version__,
        "columns": RESULT_COLUMNS,
        "timing_columns": list(TIMING_COLUMNS),
        "solutions": [],
    }
    sol_dir = out / "solutions"
    sol_dir.mkdir(exist_ok=True)
    for row, dump in zip(rows, dumps):
        if dump is None:
            continue
        name = f"sol_{row.model}_{row.policy.replace(':', '')}_{row.scale}.json"
        _atomic_write(sol_dir / name, json.dumps(dump))
        manifest["solutions"].append(f"solutions/{name}")
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2))
