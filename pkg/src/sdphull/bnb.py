"""Branch-and-bound over conic relaxations.

The discrete structure is a list of *entities*: either an integer variable
with a finite value domain (branching fixes the variable to one value per
child) or a selector simplex from a hull reformulation (branching fixes one
lambda to 1 per child).  Children therefore partition the parent's integer
feasible set.

Node selection is depth-first with backtracking or best-bound; branching
entity selection supports most-fractional, lowest-index, and the
lambda-closeness rule that dives into the disjunction term with the largest
selector value first.
"""

from __future__ import annotations

import csv
import heapq
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProblem
from .solver import INFEASIBLE, OPTIMAL, Settings, SolveResult

DEPTH_FIRST = "depth-first"
BEST_BOUND = "best-bound"
MOST_FRACTIONAL = "most-fractional"
LOWEST_INDEX = "lowest-index"
LAMBDA_CLOSENESS = "lambda-closeness"

STATUS_OPTIMAL = "Optimal"
STATUS_INFEASIBLE = "Infeasible"
STATUS_NODE_LIMIT = "NodeLimit"


@dataclass(frozen=True)
class DomainEntity:
    """An integer variable branched by enumerating its domain values."""

    var_id: int
    z_index: int
    values: tuple[float, ...]


@dataclass(frozen=True)
class SimplexEntity:
    """A hull selector simplex branched by picking one term."""

    var_id: int
    lam_indices: tuple[int, ...]
    values: tuple[float, ...]


@dataclass
class Strategy:
    node_order: str = DEPTH_FIRST
    branch_var: str = MOST_FRACTIONAL
    int_tol: float = 1e-5
    gap_tol: float = 1e-6

    def __post_init__(self):
        if self.node_order not in (DEPTH_FIRST, BEST_BOUND):
            raise ValueError(f"unknown node order {self.node_order!r}")
        if self.branch_var not in (MOST_FRACTIONAL, LOWEST_INDEX,
                                   LAMBDA_CLOSENESS):
            raise ValueError(f"unknown branching rule {self.branch_var!r}")


@dataclass
class BnbNode:
    id: int
    depth: int
    fixings: dict[int, float]          # z index -> fixed value
    fixed_entities: frozenset[int]     # entity list positions already fixed
    parent_bound: float


@dataclass
class Incumbent:
    x: np.ndarray
    X: np.ndarray
    z: np.ndarray
    objective: float
    node_id: int


@dataclass
class MiResult:
    status: str
    best: Incumbent | None
    bound: float
    nodes: int
    wall_time: float
    log: list[dict] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.best.objective if self.best else math.nan

    def gap(self) -> float:
        if self.best is None:
            return math.inf
        return self.best.objective - self.bound


def _entity_state(ent, z: np.ndarray, int_tol: float):
    """(is_integral, fractional_measure, ordered child values/terms)."""
    if isinstance(ent, DomainEntity):
        v = z[ent.z_index]
        dist = [abs(v - a) for a in ent.values]
        order = sorted(range(len(ent.values)), key=lambda k: (dist[k], k))
        return dist[order[0]] <= int_tol, dist[order[0]], order
    lam = np.array([z[i] for i in ent.lam_indices])
    order = sorted(range(len(lam)), key=lambda k: (-lam[k], k))
    return lam[order[0]] >= 1.0 - int_tol, 1.0 - lam[order[0]], order


def _entropy(lam: np.ndarray) -> float:
    p = np.clip(lam, 1e-12, 1.0)
    p = p / p.sum()
    return float(-(p * np.log(p)).sum())


def select_branch(entities, fixed: frozenset[int], z: np.ndarray,
                  strategy: Strategy):
    """Pick the entity to branch on and the ordered child terms.

    Raises ValueError when every unfixed entity is already integral (the
    caller should update the incumbent instead).
    """
    candidates = []
    for pos, ent in enumerate(entities):
        if pos in fixed:
            continue
        integral, frac, order = _entity_state(ent, z, strategy.int_tol)
        if integral:
            continue
        candidates.append((pos, ent, frac, order))
    if not candidates:
        raise ValueError("no fractional entity; update the incumbent instead")

    rule = strategy.branch_var
    if rule == LOWEST_INDEX:
        pos, ent, _, order = min(candidates, key=lambda t: entities[t[0]].var_id)
    elif rule == LAMBDA_CLOSENESS:
        def closeness_key(t):
            pos, ent, frac, order = t
            if isinstance(ent, SimplexEntity):
                lam = np.array([z[i] for i in ent.lam_indices])
                return (-_entropy(lam), ent.var_id)
            return (-frac, ent.var_id)
        pos, ent, _, order = min(candidates, key=closeness_key)
    else:
        pos, ent, _, order = min(candidates, key=lambda t: (-t[2], entities[t[0]].var_id))
    return pos, ent, order


def prune(node_bound: float, incumbent_obj: float, gap_tol: float) -> bool:
    """Discard a node whose bound cannot improve on the incumbent."""
    return node_bound >= incumbent_obj - gap_tol


def _child_fixings(ent, term: int) -> dict[int, float]:
    if isinstance(ent, DomainEntity):
        return {ent.z_index: ent.values[term]}
    return {ent.lam_indices[term]: 1.0}


def _polish(prob, backend, settings, entities, node, res: SolveResult):
    """Re-solve an entity-integral node with every entity hard-fixed.

    A node is accepted as integral when each entity is within int_tol of a
    domain value, so its relaxation objective can sit up to O(int_tol) away
    from the exact value at the rounded point.  Fixing all entities and
    re-solving removes that drift before the incumbent is recorded.
    """
    fixings = dict(node.fixings)
    for pos, ent in enumerate(entities):
        if pos in node.fixed_entities:
            continue
        if isinstance(ent, DomainEntity):
            v = res.z[ent.z_index]
            fixings[ent.z_index] = min(ent.values, key=lambda a: abs(v - a))
        else:
            lam = [res.z[i] for i in ent.lam_indices]
            fixings[ent.lam_indices[int(np.argmax(lam))]] = 1.0
    if fixings == node.fixings:
        return res
    polished = backend.solve(prob, settings, fixings=sorted(fixings.items()))
    return polished if polished.status == OPTIMAL else res


def solve_mi(prob: ConicProblem, entities, backend,
             strategy: Strategy | None = None,
             settings: Settings | None = None,
             node_limit: int | None = None,
             workers: int = 1) -> MiResult:
    """Global solve of the mixed-integer conic problem by branch and bound.

    Returns the best entity-integral solution of the relaxation (the MISDP
    optimum), the proven lower bound, and the node count.
    """
    strategy = strategy or Strategy()
    settings = settings or Settings()
    t0 = time.perf_counter()
    log: list[dict] = []
    incumbent: Incumbent | None = None
    next_id = 0

    def new_node(depth, fixings, fixed_entities, parent_bound) -> BnbNode:
        nonlocal next_id
        node = BnbNode(next_id, depth, fixings, fixed_entities, parent_bound)
        next_id += 1
        return node

    root = new_node(0, {}, frozenset(), -math.inf)
    # depth-first: LIFO stack; best-bound: heap on inherited bound
    if strategy.node_order == DEPTH_FIRST:
        open_nodes: list = [root]
        pop = open_nodes.pop
        def push(n):
            open_nodes.append(n)
    else:
        open_nodes = []
        heapq.heappush(open_nodes, (root.parent_bound, root.id, root))
        def pop():
            return heapq.heappop(open_nodes)[-1]
        def push(n):
            heapq.heappush(open_nodes, (n.parent_bound, n.id, n))

    def record(node, bound, action, extra=""):
        log.append({"id": node.id, "depth": node.depth,
                    "fixing": ";".join(f"z{i}={v:g}"
                                       for i, v in sorted(node.fixings.items())),
                    "bound": bound, "action": action, "note": extra})

    def evaluate(node) -> SolveResult:
        return backend.solve(prob, settings,
                             fixings=sorted(node.fixings.items()))

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    pending: list[tuple[BnbNode, object]] = []
    nodes_done = 0
    fathom_bound = math.inf   # min proven bound over fathomed subtrees
    status = STATUS_OPTIMAL
    try:
        while open_nodes or pending:
            if node_limit is not None and nodes_done >= node_limit:
                status = STATUS_NODE_LIMIT
                break
            if not pending:
                batch = []
                take = workers if pool else 1
                while open_nodes and len(batch) < take:
                    batch.append(pop())
                if pool:
                    futures = [(n, pool.submit(evaluate, n)) for n in batch]
                    pending.extend(futures)
                else:
                    pending.extend((n, None) for n in batch)
            node, fut = pending.pop(0)
            res = fut.result() if fut is not None else evaluate(node)
            nodes_done += 1

            if incumbent is not None and prune(node.parent_bound,
                                               incumbent.objective,
                                               strategy.gap_tol):
                fathom_bound = min(fathom_bound, node.parent_bound)
                record(node, node.parent_bound, "pruned_bound", "by parent bound")
                continue
            if res.status == INFEASIBLE:
                record(node, math.nan, "infeasible")
                continue
            if res.status == OPTIMAL:
                bound = max(node.parent_bound, res.objective)
            else:
                # unproven node solve: inherit the parent bound, never prune
                # on an unproven value
                bound = node.parent_bound
                if not math.isfinite(bound):
                    record(node, bound, "limit", res.status)
                    status = STATUS_NODE_LIMIT
                    continue
            if incumbent is not None and prune(bound, incumbent.objective,
                                               strategy.gap_tol):
                fathom_bound = min(fathom_bound, bound)
                record(node, bound, "pruned_bound")
                continue
            if res.z is None:
                record(node, bound, "limit", res.status)
                continue
            try:
                pos, ent, order = select_branch(entities, node.fixed_entities,
                                                res.z, strategy)
            except ValueError:
                res = _polish(prob, backend, settings, entities, node, res)
                if incumbent is None or res.objective < incumbent.objective:
                    incumbent = Incumbent(res.x, res.X, res.z, res.objective,
                                          node.id)
                fathom_bound = min(fathom_bound, bound)
                record(node, bound, "incumbent")
                continue
            record(node, bound, "branched", f"entity var{ent.var_id}")
            children = [
                new_node(node.depth + 1,
                         {**node.fixings, **_child_fixings(ent, term)},
                         node.fixed_entities | {pos}, bound)
                for term in order
            ]
            if strategy.node_order == DEPTH_FIRST:
                # LIFO: push in reverse so the closest term is explored first
                for child in reversed(children):
                    push(child)
            else:
                for child in children:
                    push(child)
    finally:
        if pool:
            pool.shutdown(wait=False, cancel_futures=True)

    open_bounds = []
    for item in open_nodes:
        n = item if isinstance(item, BnbNode) else item[-1]
        open_bounds.append(n.parent_bound)
    if status == STATUS_NODE_LIMIT:
        bound = min(open_bounds, default=math.inf)
        if incumbent is not None:
            bound = min(bound, incumbent.objective)
    elif incumbent is None:
        status = STATUS_INFEASIBLE
        bound = math.inf
    else:
        bound = min(incumbent.objective, fathom_bound)
    return MiResult(status, incumbent, bound, nodes_done,
                    time.perf_counter() - t0, log)


def write_node_log(log: list[dict], path):
    """Node log CSV: one line per evaluated node."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "depth", "fixing",
                                                "bound", "action", "note"])
        writer.writeheader()
        for row in log:
            writer.writerow(row)
