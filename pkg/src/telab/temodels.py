"""Tunnel-based TE and congestion-free resilient (FFC) LP models.

The base model maximizes total delivered flow subject to per-arc capacity,
per-demand delivery, and demand caps.  The resilient variant keeps one shared
set of tunnel rates but requires the surviving tunnels of every single-link
failure scenario to still deliver each demand's admitted flow: protection is
proactive, rates are not recomputed after a failure, dead tunnels simply drop
their load.  A demand whose tunnels can all be severed by one failure gets
zero admitted flow.

Capacity rows can be emitted for every scenario (``all``, the literal
substitution) or only for the normal state (``normal_only``); failures only
remove load, so both modes share the same optimum, which tests assert.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import lpcore
from .demands import Demand, TrafficMatrix
from .errors import SolveError, ValidationError
from .lpcore import LpProblem, LpSolution
from .topology import Topology
from .tunnels import ScenarioSet, Tunnel, TunnelSet, available_tunnels

CAPACITY_MODE_ALL = "all"
CAPACITY_MODE_NORMAL_ONLY = "normal_only"

DELIVERY_TOL = 1e-6
CAPACITY_TOL = 1e-6


@dataclass(frozen=True)
class ModelMeta:
    kind: str  # "te" | "ffc"
    policy: str
    capacity_mode: str | None
    n_scenarios: int
    n_vars: int
    n_constraints: int


@dataclass(frozen=True)
class TeModel:
    """An LP plus the variable layout and the inputs it was built from.

    Column layout: tunnel rate variables first (column = global tunnel id),
    then one delivered-flow variable per demand.
    """

    problem: LpProblem
    topo: Topology
    tm: TrafficMatrix
    ts: TunnelSet
    meta: ModelMeta

    def rate_col(self, tunnel_id: int) -> int:
        return tunnel_id

    def delivered_col(self, demand_id: int) -> int:
        return self.ts.total + demand_id


@dataclass(frozen=True)
class TeSolution:
    delivered: np.ndarray  # admitted flow per demand
    tunnel_rates: np.ndarray  # rate per global tunnel id
    arc_loads: np.ndarray  # normal-state load per arc
    solve_time: float
    solution_kind: str
    meta: ModelMeta


@dataclass(frozen=True)
class Violation:
    scenario: int
    kind: str  # "capacity" | "delivery"
    index: int  # arc id or demand id
    amount: float  # positive violation magnitude


@dataclass(frozen=True)
class CongestionReport:
    ok: bool
    violations: tuple[Violation, ...]
    scenarios_checked: int


def tunnel_arc_incidence(ts: TunnelSet, n_arcs: int) -> sp.csr_matrix:
    """Sparse 0/1 matrix, entry (t, e) set when tunnel t traverses arc e."""
    rows, cols = [], []
    for t in ts.tunnels:
        for e in t.arcs:
            rows.append(t.id)
            cols.append(e)
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(ts.total, n_arcs))


def _base_problem(topo: Topology, tm: TrafficMatrix, ts: TunnelSet, name: str) -> LpProblem:
    prob = LpProblem(name=name)
    for t in ts.tunnels:
        prob.add_var(f"a_{t.demand_id}_{t.id}", 0.0, math.inf)
    for d in tm.demands:
        ub = d.volume if ts.by_demand[d.id] else 0.0
        prob.add_var(f"b_{d.id}", 0.0, ub)
    prob.set_objective([(ts.total + d.id, 1.0) for d in tm.demands], maximize=True)
    return prob


def _arc_tunnel_lists(topo: Topology, ts: TunnelSet) -> list[list[int]]:
    per_arc: list[list[int]] = [[] for _ in range(topo.n_arcs)]
    for t in ts.tunnels:
        for e in t.arcs:
            per_arc[e].append(t.id)
    return per_arc


def build_te_lp(topo: Topology, tm: TrafficMatrix, ts: TunnelSet) -> TeModel:
    """Base model: one capacity row per arc, one delivery row per demand."""
    prob = _base_problem(topo, tm, ts, "te")
    per_arc = _arc_tunnel_lists(topo, ts)
    for arc in topo.arcs:
        prob.add_constraint(
            [(t, 1.0) for t in per_arc[arc.id]], "<=", arc.capacity, f"cap_e{arc.id}")
    for d in tm.demands:
        coeffs = [(t, 1.0) for t in ts.by_demand[d.id]]
        coeffs.append((ts.total + d.id, -1.0))
        prob.add_constraint(coeffs, ">=", 0.0, f"del_f{d.id}")
    meta = ModelMeta("te", ts.policy, None, 1, prob.n_vars, prob.n_constraints)
    return TeModel(prob, topo, tm, ts, meta)


def build_ffc_lp(
    topo: Topology,
    tm: TrafficMatrix,
    ts: TunnelSet,
    scen: ScenarioSet,
    capacity_mode: str = CAPACITY_MODE_ALL,
) -> TeModel:
    """Resilient model: delivery must hold on surviving tunnels of every scenario.

    Tunnel rates are shared across scenarios.  A demand with no surviving
    tunnel in some scenario gets its admitted flow forced to zero by the
    empty-sum delivery row.
    """
    if capacity_mode not in (CAPACITY_MODE_ALL, CAPACITY_MODE_NORMAL_ONLY):
        raise ValidationError(f"unknown capacity mode {capacity_mode!r}")
    if scen.n == 0 or scen.scenarios[0].dead_arcs:
        raise ValidationError("scenario set must start with the normal state")
    prob = _base_problem(topo, tm, ts, "ffc")
    per_arc = _arc_tunnel_lists(topo, ts)

    cap_scenarios = scen.scenarios if capacity_mode == CAPACITY_MODE_ALL else scen.scenarios[:1]
    for sc in cap_scenarios:
        for arc in topo.arcs:
            if arc.id in sc.dead_arcs:
                continue
            coeffs = [
                (t, 1.0)
                for t in per_arc[arc.id]
                if not any(a in sc.dead_arcs for a in ts.tunnels[t].arcs)
            ]
            prob.add_constraint(coeffs, "<=", arc.capacity, f"cap_q{sc.id}_e{arc.id}")

    for sc in scen.scenarios:
        alive = available_tunnels(ts, scen, sc.id)
        for d in tm.demands:
            coeffs = [(t, 1.0) for t in alive[d.id]]
            coeffs.append((ts.total + d.id, -1.0))
            prob.add_constraint(coeffs, ">=", 0.0, f"del_f{d.id}_q{sc.id}")

    meta = ModelMeta("ffc", ts.policy, capacity_mode, scen.n, prob.n_vars, prob.n_constraints)
    return TeModel(prob, topo, tm, ts, meta)


def extract_solution(lp_sol: LpSolution, model: TeModel) -> TeSolution:
    """Turn an optimal LP solution into structured flows with recomputed loads.

    Arc loads come from the rate variables and the tunnel arc incidence, not
    from any solver-internal row activity.
    """
    if lp_sol.status != lpcore.OPTIMAL:
        raise SolveError(f"cannot extract from status {lp_sol.status!r}: {lp_sol.message}")
    x = lp_sol.values
    n_t = model.ts.total
    rates = np.array(x[:n_t], dtype=float)
    delivered = np.array(x[n_t:], dtype=float)
    rates[np.abs(rates) < 1e-12] = 0.0
    delivered[np.abs(delivered) < 1e-12] = 0.0
    incidence = tunnel_arc_incidence(model.ts, model.topo.n_arcs)
    loads = np.asarray(incidence.T @ rates).ravel()
    return TeSolution(delivered, rates, loads, lp_sol.solve_time, lp_sol.solution_kind, model.meta)


def solve_model(model: TeModel, backend: str = "bundled") -> TeSolution:
    """Convenience: solve the LP and extract, raising on non-optimal status."""
    return extract_solution(lpcore.solve(model.problem, backend), model)


def verify_congestion_free(
    sol: TeSolution,
    ts: TunnelSet,
    scen: ScenarioSet,
    topo: Topology,
) -> CongestionReport:
    """Check no-oversubscription and delivery on every scenario's survivors.

    Violations are report content rather than exceptions: for each scenario
    the residual load (surviving tunnels only) must fit every alive arc, and
    the surviving rates of each demand must still cover its admitted flow.
    """
    incidence = tunnel_arc_incidence(ts, topo.n_arcs)
    caps = topo.capacities()
    violations: list[Violation] = []
    tunnel_demand = np.array([t.demand_id for t in ts.tunnels], dtype=int)
    n_demands = len(ts.by_demand)
    for sc in scen.scenarios:
        if sc.dead_arcs:
            alive_mask = np.array(
                [not any(a in sc.dead_arcs for a in t.arcs) for t in ts.tunnels], dtype=bool)
        else:
            alive_mask = np.ones(ts.total, dtype=bool)
        rates = np.where(alive_mask, sol.tunnel_rates, 0.0)
        loads = np.asarray(incidence.T @ rates).ravel()
        for e in range(topo.n_arcs):
            if e in sc.dead_arcs:
                continue
            excess = loads[e] - caps[e]
            if excess > CAPACITY_TOL:
                violations.append(Violation(sc.id, "capacity", e, float(excess)))
        surviving = np.zeros(n_demands)
        np.add.at(surviving, tunnel_demand[alive_mask], rates[alive_mask])
        for f in range(n_demands):
            short = sol.delivered[f] - surviving[f]
            if short > DELIVERY_TOL:
                violations.append(Violation(sc.id, "delivery", f, float(short)))
    return CongestionReport(not violations, tuple(violations), scen.n)


# ---------------------------------------------------------------------------
# Solution dumps
# ---------------------------------------------------------------------------


def solution_to_dict(sol: TeSolution, model: TeModel, **extra) -> dict:
    """Self-contained JSON form: flows plus the demands and tunnel paths.

    Carrying the tunnel node paths makes the dump verifiable later against
    just a topology file.
    """
    topo, tm, ts = model.topo, model.tm, model.ts
    entries = []
    for f, ids in enumerate(ts.by_demand):
        for k, tid in enumerate(ids):
            v = float(sol.tunnel_rates[tid])
            if v > 0.0:
                entries.append({"demand": f, "tunnel": k, "value": v})
    doc = {
        "model": sol.meta.kind,
        "policy": sol.meta.policy,
        "capacity_mode": sol.meta.capacity_mode,
        "objective": float(sol.delivered.sum()),
        "solve_time": sol.solve_time,
        "solution_kind": sol.solution_kind,
        "demands": [
            {"src": topo.node_ids[d.src], "dst": topo.node_ids[d.dst], "volume": d.volume}
            for d in tm.demands
        ],
        "tunnels": [
            [[topo.node_ids[n] for n in ts.tunnels[tid].nodes] for tid in ids]
            for ids in ts.by_demand
        ],
        "b": [float(v) for v in sol.delivered],
        "a": entries,
        "loads": [float(v) for v in sol.arc_loads],
    }
    doc.update(extra)
    return doc


def solution_from_dict(doc: dict, topo: Topology) -> tuple[TeSolution, TunnelSet, TrafficMatrix]:
    """Rebuild flows, tunnels, and demands from a dump for verification."""
    try:
        demand_entries = doc["demands"]
        tunnel_paths = doc["tunnels"]
        b = doc["b"]
        a_entries = doc["a"]
    except KeyError as e:
        raise ValidationError(f"solution dump missing key {e}") from None
    demands = tuple(
        Demand(i, topo.index_of(d["src"]), topo.index_of(d["dst"]), float(d["volume"]))
        for i, d in enumerate(demand_entries)
    )
    tm = TrafficMatrix(demands)
    arc_of = topo.arc_by_endpoints
    tunnels: list[Tunnel] = []
    by_demand: list[tuple[int, ...]] = []
    for f, paths in enumerate(tunnel_paths):
        ids = []
        for path in paths:
            nodes = tuple(topo.index_of(n) for n in path)
            try:
                arcs = tuple(
                    arc_of[(nodes[i], nodes[i + 1])].id for i in range(len(nodes) - 1))
            except KeyError:
                raise ValidationError(
                    f"tunnel path {path!r} uses an arc missing from the topology") from None
            cost = sum(topo.arcs[a].weight for a in arcs)
            tid = len(tunnels)
            tunnels.append(Tunnel(tid, f, nodes, arcs, cost))
            ids.append(tid)
        by_demand.append(tuple(ids))
    ts = TunnelSet(str(doc.get("policy", "")), tuple(tunnels),
                   tuple(by_demand), tuple(f for f, i in enumerate(by_demand) if not i))
    rates = np.zeros(ts.total)
    for entry in a_entries:
        f, k = int(entry["demand"]), int(entry["tunnel"])
        rates[by_demand[f][k]] = float(entry["value"])
    delivered = np.array([float(v) for v in b])
    if delivered.size != tm.n:
        raise ValidationError("solution dump: delivered-flow vector length mismatch")
    incidence = tunnel_arc_incidence(ts, topo.n_arcs)
    loads = np.asarray(incidence.T @ rates).ravel()
    meta = ModelMeta(str(doc.get("model", "")), str(doc.get("policy", "")),
                     doc.get("capacity_mode"), 0, 0, 0)
    sol = TeSolution(delivered, rates, loads, float(doc.get("solve_time", 0.0)),
                     str(doc.get("solution_kind", "")), meta)
    return sol, ts, tm


def load_solution(path: str | Path, topo: Topology):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed solution dump: {e}") from e
    return solution_from_dict(doc, topo)
