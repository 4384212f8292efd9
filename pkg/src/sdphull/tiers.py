"""Relaxation-tier construction: basic, equality-strengthened, and
convex-hull forms of one MIQCQP, ready for the conic backends."""

from __future__ import annotations

from dataclasses import dataclass

from .model import MiqcqpProblem
from .lift import (PAIRWISE_3A, SdpRelaxation, add_valid_equalities,
                   drop_redundant_2d, lift_basic)
from .hull import (COMPACT, FULL, HullReformulation, build_disjunctions,
                   derive_y_bounds, hull_compact, hull_full)
from .conic import ConicProblem, Layout, assemble
from .bnb import DomainEntity, SimplexEntity

MIBSDP = "mibsdp"
MIESDP = "miesdp"
CH_MIESDP = "ch-miesdp"
TIERS = (MIBSDP, MIESDP, CH_MIESDP)


@dataclass
class TierBuild:
    tier: str
    relax: SdpRelaxation
    hull: HullReformulation | None
    conic: ConicProblem
    layout: Layout
    entities: list


def build_tier(problem: MiqcqpProblem, tier: str, eq_mode: str = PAIRWISE_3A,
               hull_form: str = COMPACT, mccormick: bool = False,
               drop_2d: bool = False) -> TierBuild:
    """Build one relaxation tier of the problem.

    mibsdp: basic lifting.  miesdp: plus one valid-equality family.
    ch-miesdp: the miesdp rows plus the hull reformulation of the integer
    variables' rank-1 disjunctions; branching entities become the selector
    simplices.

    drop_2d removes the copied linear equalities once the complete 3a
    family makes them redundant.  The removal is exact in arithmetic but
    numerically soft: the 3a quadratic plus the PSD cone pins c'x = b only
    to about the square root of the solver tolerance, so it is off by
    default.
    """
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}; choose from {TIERS}")
    relax = lift_basic(problem, mccormick=mccormick)
    if tier in (MIESDP, CH_MIESDP) and problem.partition.S_LE:
        relax = add_valid_equalities(relax, problem, eq_mode)
        if drop_2d and eq_mode == PAIRWISE_3A:
            relax = drop_redundant_2d(relax)

    hull = None
    if tier == CH_MIESDP and problem.integer_set:
        disjunctions = build_disjunctions(problem)
        y_lo, y_hi = derive_y_bounds(problem)
        build = hull_full if hull_form == FULL else hull_compact
        hull = build(disjunctions, y_lo, y_hi, problem.n)

    conic, layout = assemble(relax, hull)

    entities: list = []
    if hull is not None:
        by_dis: dict[int, list[tuple[int, int]]] = {}
        for (i, k) in hull.lam_ids:
            by_dis.setdefault(i, []).append((k, layout.lam_index(i, k)))
        for dis in hull.disjunctions:
            if dis.var_id not in by_dis:
                continue   # single-value domain, substituted as a constant
            terms = sorted(by_dis[dis.var_id])
            entities.append(SimplexEntity(
                dis.var_id, tuple(idx for _, idx in terms), dis.values))
    else:
        for i in problem.integer_set:
            entities.append(DomainEntity(i, layout.x_index(i),
                                         tuple(problem.variables[i].domain)))
    return TierBuild(tier, relax, hull, conic, layout, entities)
