# =======================================================================
# Project:      SeqPack Solver
# File:         Lazy refinement solver and plate-scale search
# =======================================================================

"""
Sequential packing solver.

The abstraction F holds temporal separation and the points-outside-polygon
implications. Each bounded solve asserts the plate constraints for one
scale sigma in a push/pop scope, checks, and tests the model's earlier hull
against later envelope edge by edge. Violated edge pairs become
T_i < T_j => LnI refinements. Refinements found inside the scope are
re-asserted at depth 0 after the pop, so F keeps growing across scales.

solve() bisects sigma in (0, 1] down to epsilon_xy, solve_eager() asserts
every edge constraint up front, solve_multi_plate() spills objects that do
not fit onto further plates.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple
import logging
import time

from config import solver_command
from encoder import (
    ConstraintSet,
    ConstraintTag,
    Formula,
    FormulaBuilder,
    TaggedFormula,
    TagOrigin,
    non_parallel_edge_pairs,
    t_var,
    x_var,
    y_var,
)
from geometry import Overlap, Segment, Vec2, polygons_disjoint, segments_intersect, translate
from model import (
    Instance,
    ObjectPosition,
    Placement,
    SolveOutcome,
    SolveStats,
    SolveStatus,
    SolverMode,
)
from smt import SmtStatus, SolverSession, open_session
from verify import verify_solution
from exceptions import NonTermination, ObjectNeverFits, VerificationError

logger = logging.getLogger(__name__)

SessionFactory = Callable[[], SolverSession]
RefinementKey = Tuple[int, int, int, int]
CUT_EDGES = (-1, -1)


@dataclass(frozen=True)
class RefinementRecord:
    pair: Tuple[int, int]
    edges: Tuple[int, int]
    constraint: Formula
    round: int
    origin: TagOrigin = TagOrigin.PLNI_REFINEMENT

    @property
    def key(self) -> RefinementKey:
        return self.pair + self.edges


@dataclass
class SigmaSearchState:
    sigma_lo: Fraction = Fraction(0)
    sigma_hi: Fraction = Fraction(1)
    best: Optional[Placement] = None
    iterations: int = 0

    def __post_init__(self):
        if not 0 <= self.sigma_lo < self.sigma_hi <= 1:
            raise ValueError(f"Bad sigma bracket [{self.sigma_lo}, {self.sigma_hi}]")

    @property
    def width(self) -> Fraction:
        return self.sigma_hi - self.sigma_lo

    @property
    def midpoint(self) -> Fraction:
        return (self.sigma_hi + self.sigma_lo) / 2

    def feasible(self, sigma: Fraction, placement: Placement) -> None:
        self.sigma_hi = sigma
        self.best = placement

    def infeasible(self, sigma: Fraction) -> None:
        self.sigma_lo = sigma


@dataclass
class BoundedResult:
    status: SolveStatus
    placement: Optional[Placement] = None
    refinements: List[RefinementRecord] = field(default_factory=list)


class PlateAssignment(NamedTuple):
    plate_index: int
    object_ids: List[str]
    outcome: SolveOutcome


class Deadline:
    """Wall-clock budget shared by every check of one solve"""

    def __init__(self, budget_ms: int):
        self.budget_ms = budget_ms
        self._start = time.monotonic()

    def elapsed_ms(self) -> int:
        return int((time.monotonic() - self._start) * 1000)

    def remaining_ms(self) -> int:
        return max(0, self.budget_ms - self.elapsed_ms())

    def expired(self) -> bool:
        return self.remaining_ms() <= 0


def default_session_factory(command: Optional[List[str]] = None) -> SessionFactory:
    resolved = command or solver_command()
    return lambda: open_session(resolved)


def placement_from_model(instance: Instance, model: Dict) -> Placement:
    return Placement({
        obj.id: ObjectPosition(model[x_var(i)], model[y_var(i)], model[t_var(i)])
        for i, obj in enumerate(instance.objects)
    })


def find_violations(
    instance: Instance,
    placement: Placement,
) -> Tuple[List[RefinementKey], List[Tuple[int, int]]]:
    """
    Edge pairs the model violates, and ordered pairs that still overlap
    although no non-parallel edge pair meets.

    For every i printed before j, each non-parallel pair (edge a of hull i,
    edge b of envelope j) is tested with closed segment intersection.
    """
    hulls = []
    envs = []
    for obj, env in zip(instance.objects, instance.envelopes):
        pos = placement[obj.id]
        hulls.append(translate(obj.footprint, Vec2(pos.x, pos.y)))
        envs.append(translate(env.polygon, Vec2(pos.x, pos.y)))

    edge_hits: List[RefinementKey] = []
    overlaps: List[Tuple[int, int]] = []
    for i, oi in enumerate(instance.objects):
        for j, oj in enumerate(instance.objects):
            if i == j or not placement[oi.id].t < placement[oj.id].t:
                continue
            found = False
            for a, b in non_parallel_edge_pairs(instance.objects[i].footprint, instance.envelopes[j].polygon):
                if segments_intersect(Segment(*hulls[i].edge(a)), Segment(*envs[j].edge(b))):
                    edge_hits.append((i, j, a, b))
                    found = True
            if not found and polygons_disjoint(hulls[i], envs[j]) == Overlap.OVERLAPPING:
                overlaps.append((i, j))
    return edge_hits, overlaps


def refinement_bound(instance: Instance) -> int:
    """Most rounds a bounded solve can take before every edge constraint is present"""
    total = 0
    for i in range(instance.k):
        for j in range(instance.k):
            if i != j:
                total += len(non_parallel_edge_pairs(instance.objects[i].footprint, instance.envelopes[j].polygon))
                total += 1  # separating cut
    return total + 1


class CegarSolver:
    """
    One solve over one solver session.

    Args:
        instance: Problem to solve
        session: Exclusively owned solver session
        lazy: True for the refinement loop, False to assert every edge
            constraint before the first check
    """

    def __init__(self, instance: Instance, session: SolverSession, lazy: bool = True):
        self.instance = instance
        self.session = session
        self.lazy = lazy
        self.builder = FormulaBuilder(instance)
        self.constraints = ConstraintSet()
        self.refinements: List[RefinementRecord] = []
        self.stats = SolveStats()
        self.deadline = Deadline(instance.params.timeout_ms)
        self._round = 0
        self._max_rounds = refinement_bound(instance)

    def initialize(self) -> None:
        """Assert F: temporal separation plus the sequential implications"""
        self.constraints = self.builder.build_formula(abstraction=self.lazy)
        # every X/Y/T must be in the model, even when no constraint mentions it (k=1 has no T term)
        self.session.declare(self.builder.declarations)
        for tagged in self.constraints.base:
            self.session.assert_base(tagged)
        logger.debug(f"{self.instance.name}: asserted {len(self.constraints.base)} base constraints "
                     f"({self.session.commands_sent} solver commands)")

    def _refine(self, edge_hits: List[RefinementKey], overlaps: List[Tuple[int, int]]) -> List[RefinementRecord]:
        added = []
        keys = self.constraints.refinement_keys
        for i, j, a, b in edge_hits:
            if (i, j, a, b) in keys:
                continue
            formula = self.builder.encode_refinement(i, j, a, b)
            added.append(RefinementRecord((i, j), (a, b), formula, self._round))
        for i, j in overlaps:
            if (i, j) + CUT_EDGES in keys:
                continue
            formula = self.builder.encode_separating_cut(i, j)
            added.append(RefinementRecord((i, j), CUT_EDGES, formula, self._round, TagOrigin.SEPARATING_CUT))
        for record in added:
            keys.add(record.key)
            self.session.assert_scoped(TaggedFormula(
                record.constraint,
                ConstraintTag(record.origin, pair=record.pair,
                              edges=None if record.edges == CUT_EDGES else record.edges)
            ))
            logger.debug(f"{self.instance.name}: round {self._round} refinement {record.origin.value} "
                         f"pair={record.pair} edges={record.edges}")
        return added

    def _persist(self, pending: List[RefinementRecord]) -> None:
        """Re-assert refinements found inside the closed scope at depth 0"""
        for record in pending:
            tagged = self.constraints.add(
                record.constraint,
                ConstraintTag(record.origin, pair=record.pair,
                              edges=None if record.edges == CUT_EDGES else record.edges)
            )
            self.session.assert_base(tagged)
        self.refinements.extend(pending)

    def solve_bounded(self, sigma: Fraction) -> BoundedResult:
        """
        Decide whether the objects fit the sigma-scaled plate.

        Returns SAT with a placement whose earlier hulls clear every later
        envelope, UNSAT, or TIMEOUT once the shared deadline passes.
        """
        assumptions = self.builder.plate_assumptions(sigma)
        self.constraints.set_assumptions(assumptions)
        self.session.push()
        for tagged in assumptions:
            self.session.assert_scoped(tagged)

        pending: List[RefinementRecord] = []
        result: BoundedResult
        while True:
            if self.deadline.expired():
                result = BoundedResult(SolveStatus.TIMEOUT)
                break
            answer = self.session.check(timeout_ms=self.deadline.remaining_ms())
            self.stats.solver_calls += 1

            if answer.status in (SmtStatus.TIMEOUT, SmtStatus.UNKNOWN):
                result = BoundedResult(SolveStatus.TIMEOUT)
                break
            if answer.status == SmtStatus.UNSAT:
                result = BoundedResult(SolveStatus.UNSAT)
                break

            placement = placement_from_model(self.instance, answer.model)
            edge_hits, overlaps = find_violations(self.instance, placement)
            if not edge_hits and not overlaps:
                result = BoundedResult(SolveStatus.SAT, placement)
                break
            if not self.lazy and edge_hits:
                logger.warning(f"{self.instance.name}: eager model violates {len(edge_hits)} asserted edge constraints")

            self._round += 1
            if self._round > self._max_rounds:
                raise NonTermination(
                    f"Refinement did not converge after {self._max_rounds} rounds",
                    details=f"instance {self.instance.name}, sigma={sigma}"
                )
            added = self._refine(edge_hits, overlaps)
            if not added:
                raise NonTermination(
                    "Model violates constraints that are already asserted",
                    details=f"instance {self.instance.name}, sigma={sigma}, pairs={edge_hits[:3] or overlaps[:3]}"
                )
            pending.extend(added)
            self.stats.refinement_rounds += 1
            self.stats.constraints_added += len(added)

        if self.session.alive:
            self.session.pop()
            self._persist(pending)
        else:
            self.refinements.extend(pending)
        self.constraints.set_assumptions([])
        result.refinements = pending
        logger.debug(f"{self.instance.name}: sigma={sigma} -> {result.status.value} "
                     f"after {len(pending)} refinements")
        return result

    def search(self) -> SolveOutcome:
        """Check sigma = 1, then bisect while the bracket is wider than epsilon_xy"""
        params = self.instance.params
        first = self.solve_bounded(Fraction(1))
        if first.status != SolveStatus.SAT:
            return self._outcome(first.status, None, None, None)

        state = SigmaSearchState()
        state.feasible(Fraction(1), first.placement)
        if params.optimize_sigma:
            while state.width > params.epsilon_xy:
                sigma = state.midpoint
                state.iterations += 1
                bounded = self.solve_bounded(sigma)
                logger.info(f"{self.instance.name}: sigma iteration {state.iterations} "
                            f"sigma={sigma} -> {bounded.status.value}")
                if bounded.status == SolveStatus.SAT:
                    state.feasible(sigma, bounded.placement)
                elif bounded.status == SolveStatus.UNSAT:
                    state.infeasible(sigma)
                else:
                    self.stats.search_complete = False
                    logger.warning(f"{self.instance.name}: sigma search timed out at bracket "
                                   f"[{state.sigma_lo}, {state.sigma_hi}]")
                    break
        self.stats.sigma_iterations = state.iterations
        return self._outcome(SolveStatus.SAT, state.best, state.sigma_hi, state.sigma_lo)

    def _outcome(self, status, placement, sigma_star, sigma_lower) -> SolveOutcome:
        self.stats.wall_ms = self.deadline.elapsed_ms()
        name, version = self.session.solver_info
        return SolveOutcome(
            status=status,
            placement=placement,
            sigma_star=sigma_star,
            sigma_lower=sigma_lower,
            stats=self.stats,
            solver_name=name,
            solver_version=version,
        )


def _run(instance: Instance, lazy: bool, session_factory: Optional[SessionFactory]) -> SolveOutcome:
    factory = session_factory or default_session_factory()
    mode = "cegar" if lazy else "eager"
    logger.info(f"Solving {instance.name}: k={instance.k}, mode={mode}, "
                f"optimize_sigma={instance.params.optimize_sigma}, timeout={instance.params.timeout_ms} ms")
    with factory() as session:
        solver = CegarSolver(instance, session, lazy=lazy)
        solver.initialize()
        outcome = solver.search()

    if outcome.status == SolveStatus.SAT:
        report = verify_solution(instance, outcome.placement, outcome.sigma_star)
        if not report.ok:
            raise VerificationError(
                f"Solver placement for {instance.name} failed certification",
                details="; ".join(f"{v.kind.value} {v.object_ids} {v.witness}" for v in report.violations)
            )
    logger.info(f"Solved {instance.name}: {outcome.status.value}, sigma*={outcome.sigma_star}, "
                f"{outcome.stats.refinement_rounds} refinement rounds, {outcome.stats.wall_ms} ms")
    return outcome


def solve(instance: Instance, session_factory: Optional[SessionFactory] = None) -> SolveOutcome:
    """
    Lazy refinement solve with optional sigma minimization.

    Every SAT outcome is certified by verify_solution before it is returned.
    """
    return _run(instance, lazy=True, session_factory=session_factory)


def solve_eager(instance: Instance, session_factory: Optional[SessionFactory] = None) -> SolveOutcome:
    """Same contract as solve, with all edge non-intersection constraints asserted up front"""
    return _run(instance, lazy=False, session_factory=session_factory)


def solve_instance(instance: Instance, session_factory: Optional[SessionFactory] = None) -> SolveOutcome:
    """Dispatch on instance.params.mode"""
    if instance.params.mode == SolverMode.EAGER:
        return solve_eager(instance, session_factory)
    return solve(instance, session_factory)


SubsetPolicy = Callable[[Instance, List[int], Callable[[Instance], SolveOutcome]], Tuple[List[int], SolveOutcome]]


def decremental_prefix(
    instance: Instance,
    remaining: List[int],
    solve_fn: Callable[[Instance], SolveOutcome],
) -> Tuple[List[int], SolveOutcome]:
    """Longest prefix of remaining that fits at sigma = 1, dropping the last object on failure"""
    for n in range(len(remaining), 0, -1):
        chosen = remaining[:n]
        outcome = solve_fn(instance.subset(chosen, optimize_sigma=False))
        if outcome.status == SolveStatus.SAT:
            return chosen, outcome
        logger.debug(f"{instance.name}: {n} objects do not fit ({outcome.status.value}), dropping the last")
    raise ObjectNeverFits(
        f"Object {instance.objects[remaining[0]].id} does not fit an empty plate",
        object_ids=[instance.objects[remaining[0]].id]
    )


def solve_multi_plate(
    instance: Instance,
    session_factory: Optional[SessionFactory] = None,
    subset_policy: Optional[SubsetPolicy] = None,
) -> List[PlateAssignment]:
    """
    Schedule objects over as many plates as needed.

    Each plate takes the subset chosen by subset_policy (default: longest
    feasible prefix of the remaining objects in input order), then sigma is
    minimized for that subset when the instance asks for it.

    Raises:
        ObjectNeverFits: If some object does not fit the plate even alone
    """
    policy = subset_policy or decremental_prefix

    def solve_fn(sub: Instance) -> SolveOutcome:
        return solve_instance(sub, session_factory)

    never_fits = []
    for i, obj in enumerate(instance.objects):
        alone = solve_fn(instance.subset([i], optimize_sigma=False))
        if alone.status != SolveStatus.SAT:
            never_fits.append(obj.id)
    if never_fits:
        raise ObjectNeverFits(
            f"{len(never_fits)} objects do not fit an empty plate: {', '.join(never_fits)}",
            object_ids=never_fits
        )

    plates: List[PlateAssignment] = []
    remaining = list(range(instance.k))
    while remaining:
        chosen, outcome = policy(instance, remaining, solve_fn)
        if instance.params.optimize_sigma:
            optimized = solve_fn(instance.subset(chosen))
            if optimized.status == SolveStatus.SAT:
                outcome = optimized
            else:
                logger.warning(f"{instance.name}: sigma search for plate {len(plates)} ended "
                               f"{optimized.status.value}; keeping the unscaled placement")
        ids = [instance.objects[i].id for i in chosen]
        plates.append(PlateAssignment(len(plates), ids, outcome))
        logger.info(f"{instance.name}: plate {len(plates) - 1} takes {len(ids)} objects, "
                    f"{len(remaining) - len(chosen)} remain")
        chosen_set = set(chosen)
        remaining = [i for i in remaining if i not in chosen_set]
    return plates
