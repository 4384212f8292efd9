"""Radial feeder model and the smart-inverter placement MIQCQP.

Units: powers in MW / MVAr / MVA, impedances in per-unit on a 1 MVA system
base, voltages as squared per-unit magnitude, branch currents as squared
per-unit magnitude.  Branch flow constraints follow the radial branch flow
model: per-node active/reactive balance, the voltage-drop equality along
each branch, and the quadratic coupling v_i * l_ij = P_ij^2 + Q_ij^2.

A smart inverter at a PV node adds a reactive capability region
q^2 + p_pv^2 <= S_inv^2 + (1 - alpha) S_pv^2 and a big-M link tying the
inverter rating S_inv to the install decision alpha.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import EQ, LE, MiqcqpProblem, ModelError, QuadraticForm, VarSpec
from .lift import error_metrics

DEFAULT_V_MIN = 0.95 ** 2
DEFAULT_V_MAX = 1.05 ** 2
DEFAULT_L_CAP = 50.0
BIG_M_FACTOR = 2.0


class FeederError(ModelError):
    """Feeder data fails validation (topology or schema)."""


@dataclass(frozen=True)
class FeederNode:
    id: str
    p_load: float = 0.0
    q_load: float = 0.0
    v_min: float = DEFAULT_V_MIN
    v_max: float = DEFAULT_V_MAX


@dataclass(frozen=True)
class FeederBranch:
    from_node: str
    to_node: str
    r: float
    x: float
    l_cap: float = DEFAULT_L_CAP


@dataclass(frozen=True)
class PvUnit:
    node: str
    s_pv: float          # panel rating, MVA
    p_pv: float          # operating output, MW

    def __post_init__(self):
        if not (0.0 <= self.p_pv <= self.s_pv):
            raise FeederError(f"PV at {self.node}: need 0 <= p_pv <= s_pv")


@dataclass
class RadialFeeder:
    nodes: list[FeederNode]
    branches: list[FeederBranch]
    substation: str
    rating: float        # substation transformer rating, MVA

    def __post_init__(self):
        self._validate_tree()

    def _validate_tree(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise FeederError("duplicate node ids")
        idset = set(ids)
        if self.substation not in idset:
            raise FeederError(f"substation {self.substation!r} not a node")
        if len(self.branches) != len(self.nodes) - 1:
            raise FeederError(
                f"{len(self.branches)} branches for {len(self.nodes)} nodes; "
                "a radial feeder needs |E| = |N| - 1"
            )
        adj = defaultdict(list)
        for br in self.branches:
            for end in (br.from_node, br.to_node):
                if end not in idset:
                    raise FeederError(f"branch references unknown node {end!r}")
            adj[br.from_node].append((br.to_node, br))
            adj[br.to_node].append((br.from_node, br))
        seen = {self.substation}
        stack = [self.substation]
        parent_edge = {}
        while stack:
            u = stack.pop()
            for v, br in adj[u]:
                if br is parent_edge.get(u):
                    continue
                if v in seen:
                    raise FeederError(
                        f"cycle detected at branch {br.from_node}-{br.to_node}"
                    )
                seen.add(v)
                parent_edge[v] = br
                stack.append(v)
        missing = idset - seen
        if missing:
            raise FeederError(f"disconnected nodes: {sorted(missing)}")

    def oriented_branches(self) -> list[tuple[str, str, FeederBranch]]:
        """Branches as (parent, child) pairs by BFS from the substation."""
        adj = defaultdict(list)
        for br in self.branches:
            adj[br.from_node].append((br.to_node, br))
            adj[br.to_node].append((br.from_node, br))
        out = []
        seen = {self.substation}
        queue = [self.substation]
        while queue:
            u = queue.pop(0)
            for v, br in adj[u]:
                if v in seen:
                    continue
                seen.add(v)
                out.append((u, v, br))
                queue.append(v)
        return out

    def node(self, nid: str) -> FeederNode:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise FeederError(f"unknown node {nid!r}")


@dataclass
class Costs:
    c_s: float           # smart-inverter cost per MVA
    c_c: float           # conventional-inverter cost per MVA


@dataclass
class PlacementInstance:
    feeder: RadialFeeder
    pvs: list[PvUnit]
    costs: Costs
    big_m: dict[str, float]
    problem: MiqcqpProblem
    var_map: dict[str, int] = field(default_factory=dict)

    def index(self, name: str) -> int:
        return self.var_map[name]

    def cost_breakdown(self, x: np.ndarray) -> dict:
        """Recompute the objective independently from the variable values."""
        smart = sum(self.costs.c_s * x[self.index(f"S_inv[{pv.node}]")]
                    for pv in self.pvs)
        conv = sum(self.costs.c_c * pv.s_pv
                   * (1.0 - x[self.index(f"alpha[{pv.node}]")])
                   for pv in self.pvs)
        return {"smart": float(smart), "conventional": float(conv),
                "total": float(smart + conv)}


def build_placement(feeder: RadialFeeder, pvs: list[PvUnit], costs: Costs,
                    big_m: dict[str, float] | None = None) -> PlacementInstance:
    """Assemble the placement MIQCQP for a feeder and its PV units.

    Variable order: branch P, branch Q, substation p_gen/q_gen, node v,
    branch l, then per-PV S_inv, q_inv, alpha.
    """
    pv_nodes = [pv.node for pv in pvs]
    if len(set(pv_nodes)) != len(pv_nodes):
        raise FeederError("one PV per node")
    for pv in pvs:
        feeder.node(pv.node)
    oriented = feeder.oriented_branches()
    R = feeder.rating
    flow_cap = R + sum(pv.s_pv for pv in pvs)
    if big_m is None:
        big_m = {}
    big_m = {pv.node: big_m.get(pv.node, BIG_M_FACTOR * pv.s_pv) for pv in pvs}

    specs: list[VarSpec] = []
    var_map: dict[str, int] = {}

    def add(name, lo, hi, domain=None):
        var_map[name] = len(specs)
        specs.append(VarSpec(len(specs), name, lo, hi, domain))

    for u, v, _ in oriented:
        add(f"P[{u}-{v}]", -flow_cap, flow_cap)
    for u, v, _ in oriented:
        add(f"Q[{u}-{v}]", -flow_cap, flow_cap)
    add("p_gen", -0.6 * R, R)
    add("q_gen", -R, R)
    for node in feeder.nodes:
        add(f"v[{node.id}]", node.v_min, node.v_max)
    for u, v, br in oriented:
        add(f"l[{u}-{v}]", 0.0, br.l_cap)
    for pv in pvs:
        add(f"S_inv[{pv.node}]", 0.0, big_m[pv.node])
    for pv in pvs:
        add(f"q_inv[{pv.node}]", -big_m[pv.node], big_m[pv.node])
    for pv in pvs:
        add(f"alpha[{pv.node}]", 0.0, 1.0, (0.0, 1.0))

    n = len(specs)
    pv_by_node = {pv.node: pv for pv in pvs}
    in_branch = {v: (u, v, br) for u, v, br in oriented}
    out_branches = defaultdict(list)
    for u, v, br in oriented:
        out_branches[u].append((u, v, br))

    cons: list[QuadraticForm] = []

    def lin(coefs: dict[str, float], b: float, sense: str):
        c = np.zeros(n)
        for name, val in coefs.items():
            c[var_map[name]] += val
        cons.append(QuadraticForm(None, c, b, sense))

    # active and reactive balance per node
    for node in feeder.nodes:
        nid = node.id
        pcoefs: dict[str, float] = {}
        qcoefs: dict[str, float] = {}
        for u, v, _ in out_branches[nid]:
            pcoefs[f"P[{u}-{v}]"] = pcoefs.get(f"P[{u}-{v}]", 0.0) + 1.0
            qcoefs[f"Q[{u}-{v}]"] = qcoefs.get(f"Q[{u}-{v}]", 0.0) + 1.0
        if nid in in_branch:
            u, v, br = in_branch[nid]
            pcoefs[f"P[{u}-{v}]"] = -1.0
            pcoefs[f"l[{u}-{v}]"] = br.r
            qcoefs[f"Q[{u}-{v}]"] = -1.0
            qcoefs[f"l[{u}-{v}]"] = br.x
        if nid == feeder.substation:
            pcoefs["p_gen"] = -1.0
            qcoefs["q_gen"] = -1.0
        p_inj = -node.p_load
        q_inj = -node.q_load
        if nid in pv_by_node:
            p_inj += pv_by_node[nid].p_pv
            qcoefs[f"q_inv[{nid}]"] = -1.0
        lin(pcoefs, p_inj, EQ)
        lin(qcoefs, q_inj, EQ)

    # voltage drop per branch
    for u, v, br in oriented:
        lin({f"v[{v}]": 1.0, f"v[{u}]": -1.0,
             f"P[{u}-{v}]": 2.0 * br.r, f"Q[{u}-{v}]": 2.0 * br.x,
             f"l[{u}-{v}]": -(br.r ** 2 + br.x ** 2)}, 0.0, EQ)

    # current-flow quadratic equality v_u * l = P^2 + Q^2
    for u, v, br in oriented:
        iv, il = var_map[f"v[{u}]"], var_map[f"l[{u}-{v}]"]
        ip, iq = var_map[f"P[{u}-{v}]"], var_map[f"Q[{u}-{v}]"]
        Q = sp.lil_matrix((n, n))
        Q[iv, il] = Q[il, iv] = 0.5
        Q[ip, ip] = -1.0
        Q[iq, iq] = -1.0
        cons.append(QuadraticForm(Q.tocsr(), np.zeros(n), 0.0, EQ))

    # inverter capability, simple bounds, and big-M install link per PV
    for pv in pvs:
        nid = pv.node
        iq, isv, ia = (var_map[f"q_inv[{nid}]"], var_map[f"S_inv[{nid}]"],
                       var_map[f"alpha[{nid}]"])
        Q = sp.lil_matrix((n, n))
        Q[iq, iq] = 1.0
        Q[isv, isv] = -1.0
        c = np.zeros(n)
        c[ia] = pv.s_pv ** 2
        cons.append(QuadraticForm(Q.tocsr(), c, pv.s_pv ** 2 - pv.p_pv ** 2, LE))
        lin({f"q_inv[{nid}]": 1.0, f"S_inv[{nid}]": -1.0}, 0.0, LE)
        lin({f"q_inv[{nid}]": -1.0, f"S_inv[{nid}]": -1.0}, 0.0, LE)
        lin({f"alpha[{nid}]": pv.s_pv, f"S_inv[{nid}]": -1.0}, 0.0, LE)
        lin({f"S_inv[{nid}]": 1.0, f"alpha[{nid}]": -big_m[nid]}, 0.0, LE)

    # objective: smart-inverter cost plus conventional cost of non-upgraded
    # panels; the constant part is carried in the offset
    obj_c = np.zeros(n)
    const = 0.0
    for pv in pvs:
        obj_c[var_map[f"S_inv[{pv.node}]"]] += costs.c_s
        obj_c[var_map[f"alpha[{pv.node}]"]] -= costs.c_c * pv.s_pv
        const += costs.c_c * pv.s_pv
    objective = QuadraticForm(None, obj_c, -const, LE)

    problem = MiqcqpProblem(specs, objective, cons)
    return PlacementInstance(feeder, list(pvs), costs, big_m, problem, var_map)


# ------------------------------------------------------------- demo system

# 13-node radial feeder in the style of the IEEE 13-bus test system.  Loads
# follow the published spot loads (total 3.266 MW); line impedances are
# synthesized plausible per-unit values on a 1 MVA / 4.16 kV base since the
# reference case publishes only topology, loads and PV ratings.
_DEMO_LOADS = {
    # node: (p_load MW, q_load MVAr)
    "650": (0.0, 0.0),
    "632": (0.0, 0.0),
    "633": (0.0, 0.0),
    "634": (0.400, 0.290),
    "645": (0.170, 0.125),
    "646": (0.230, 0.132),
    "671": (1.155, 0.660),
    "680": (0.0, 0.0),
    "684": (0.0, 0.0),
    "611": (0.170, 0.080),
    "652": (0.128, 0.086),
    "692": (0.170, 0.151),
    "675": (0.843, 0.462),
}

_DEMO_BRANCHES = [
    # from, to, r pu, x pu; sized so that the remote buses need reactive
    # support and the install decision is a real trade-off
    ("650", "632", 0.0120, 0.0354),
    ("632", "633", 0.0225, 0.0231),
    ("633", "634", 0.0180, 0.0186),
    ("632", "645", 0.0240, 0.0243),
    ("645", "646", 0.0135, 0.0138),
    ("632", "671", 0.0120, 0.0351),
    ("671", "680", 0.0114, 0.0333),
    ("671", "684", 0.0135, 0.0138),
    ("684", "611", 0.0135, 0.0135),
    ("684", "652", 0.0360, 0.0147),
    ("671", "692", 0.0030, 0.0030),
    ("692", "675", 0.0210, 0.0105),
]

_DEMO_PV = {"632": 0.200, "633": 0.600, "646": 0.400, "680": 0.700,
            "684": 0.500}

DEMO_RATING = 5.0        # substation transformer MVA
DEMO_C_C = 1.0           # conventional-inverter cost per MVA
DEMO_C_S = 1.5 * DEMO_C_C


def demo_feeder_13() -> tuple[RadialFeeder, list[PvUnit], Costs]:
    """Built-in 13-node demo: published loads and PV ratings, synthesized
    impedances.  PV penetration is 2.4 / 3.266 = 73.5 percent."""
    nodes = [FeederNode(nid, p, q) for nid, (p, q) in _DEMO_LOADS.items()]
    branches = [FeederBranch(u, v, r, x) for u, v, r, x in _DEMO_BRANCHES]
    feeder = RadialFeeder(nodes, branches, "650", DEMO_RATING)
    pvs = [PvUnit(nid, s, s) for nid, s in sorted(_DEMO_PV.items())]
    return feeder, pvs, Costs(DEMO_C_S, DEMO_C_C)


# --------------------------------------------------------------- analytics

def analyze_solution(instance: PlacementInstance, x: np.ndarray,
                     X: np.ndarray | None = None,
                     objective: float | None = None) -> dict:
    """Solution-quality report: relaxation objective, error-matrix metrics,
    and original-problem feasibility of the x part."""
    report = instance.problem.evaluate_point(x)
    out = {
        "oov": float(objective) if objective is not None
        else instance.problem.objective_value(x),
        "feasibility": {
            "max_violation": report.max_violation(),
            "constraint_max": float(np.abs(report.constraint_violation).max(initial=0.0)),
            "box_max": float(report.box_violation.max(initial=0.0)),
            "integer_max": float(report.integer_distance.max(initial=0.0)),
        },
        "cost_breakdown": instance.cost_breakdown(x),
        "alpha": {pv.node: float(x[instance.index(f"alpha[{pv.node}]")])
                  for pv in instance.pvs},
    }
    if X is not None:
        out.update(error_metrics(x, X))
    return out


# ------------------------------------------------------------ serialization

def feeder_to_dict(feeder: RadialFeeder, pvs: list[PvUnit],
                   costs: Costs) -> dict:
    return {
        "nodes": [{"id": n.id, "p_load": n.p_load, "q_load": n.q_load,
                   "v_min": n.v_min, "v_max": n.v_max} for n in feeder.nodes],
        "branches": [{"from": b.from_node, "to": b.to_node, "r": b.r,
                      "x": b.x, "l_cap": b.l_cap} for b in feeder.branches],
        "substation": {"id": feeder.substation, "rating": feeder.rating},
        "pvs": [{"node": p.node, "s_pv": p.s_pv, "p_pv": p.p_pv} for p in pvs],
        "costs": {"c_s": costs.c_s, "c_c": costs.c_c},
    }


def save_feeder(path, feeder: RadialFeeder, pvs: list[PvUnit], costs: Costs):
    with open(path, "w") as fh:
        json.dump(feeder_to_dict(feeder, pvs, costs), fh, indent=1)


def load_feeder(path) -> tuple[RadialFeeder, list[PvUnit], Costs]:
    """Load a feeder JSON file; validates schema and radial topology."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        nodes = [FeederNode(str(d["id"]), float(d.get("p_load", 0.0)),
                            float(d.get("q_load", 0.0)),
                            float(d.get("v_min", DEFAULT_V_MIN)),
                            float(d.get("v_max", DEFAULT_V_MAX)))
                 for d in data["nodes"]]
        branches = [FeederBranch(str(d["from"]), str(d["to"]), float(d["r"]),
                                 float(d["x"]),
                                 float(d.get("l_cap", DEFAULT_L_CAP)))
                    for d in data["branches"]]
        sub = data["substation"]
        feeder = RadialFeeder(nodes, branches, str(sub["id"]),
                              float(sub["rating"]))
        pvs = [PvUnit(str(d["node"]), float(d["s_pv"]), float(d["p_pv"]))
               for d in data.get("pvs", [])]
        cd = data.get("costs", {})
        costs = Costs(float(cd.get("c_s", DEMO_C_S)),
                      float(cd.get("c_c", DEMO_C_C)))
    except KeyError as exc:
        raise FeederError(f"missing field {exc.args[0]!r}") from exc
    return feeder, pvs, costs
