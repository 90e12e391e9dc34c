# =======================================================================
# Project:      SeqPack Solver
# File:         Refinement loop, sigma search and multi-plate tests
# =======================================================================

from fractions import Fraction

import pytest

import cegar
from cegar import (
    CegarSolver,
    Deadline,
    SigmaSearchState,
    decremental_prefix,
    find_violations,
    refinement_bound,
    solve,
    solve_eager,
    solve_instance,
    solve_multi_plate,
)
from bench import gen_complex, gen_cuboids
from model import ObjectPosition, Placement, SolveOutcome, SolverParams, SolveStatus
from verify import verify_solution
from encoder import eager_lni_count, t_var, x_var, y_var
from exceptions import NonTermination, ObjectNeverFits
from smt import SmtResult, SmtStatus
from conftest import square_instance


def placed(**positions) -> Placement:
    return Placement({oid: ObjectPosition(*xyt) for oid, xyt in positions.items()})


def fake_outcome(sub, fits: bool) -> SolveOutcome:
    if not fits:
        return SolveOutcome(SolveStatus.UNSAT)
    sigma = Fraction(1, 2) if sub.params.optimize_sigma else Fraction(1)
    positions = {obj.id: (20 * n, 0, 2 * n) for n, obj in enumerate(sub.objects)}
    return SolveOutcome(SolveStatus.SAT, placement=placed(**positions), sigma_star=sigma)


# ==================== Violation detection ====================

def test_find_violations_reports_crossing_edges():
    instance = square_instance([10, 10])
    edge_hits, overlaps = find_violations(instance, placed(sq0=(0, 0, 0), sq1=(12, 3, 2)))
    assert edge_hits
    assert {(i, j) for i, j, _, _ in edge_hits} == {(0, 1)}
    assert overlaps == []


def test_find_violations_reports_containment_as_overlap():
    instance = square_instance([10, 10])
    edge_hits, overlaps = find_violations(instance, placed(sq0=(40, 40, 0), sq1=(40, 40, 5)))
    assert edge_hits == []
    assert overlaps == [(0, 1)]


def test_find_violations_clean_placement():
    instance = square_instance([10, 10])
    assert find_violations(instance, placed(sq0=(0, 0, 0), sq1=(30, 0, 2))) == ([], [])


def test_refinement_bound_counts_edge_pairs_and_cuts():
    # 8 non-parallel edge pairs plus one cut per ordered pair
    assert refinement_bound(square_instance([10, 10])) == 2 * (8 + 1) + 1


# ==================== Search bookkeeping ====================

def test_sigma_search_state_bisects():
    state = SigmaSearchState()
    assert state.midpoint == Fraction(1, 2)
    state.feasible(Fraction(1, 2), placed(a=(0, 0, 0)))
    state.infeasible(Fraction(1, 4))
    assert state.width == Fraction(1, 4)
    assert state.midpoint == Fraction(3, 8)
    assert state.best is not None


@pytest.mark.parametrize("lo, hi", [(Fraction(1, 2), Fraction(1, 2)), (Fraction(0), Fraction(2))])
def test_sigma_search_state_rejects_bad_bracket(lo, hi):
    with pytest.raises(ValueError):
        SigmaSearchState(sigma_lo=lo, sigma_hi=hi)


def test_deadline():
    assert Deadline(0).expired()
    deadline = Deadline(60000)
    assert not deadline.expired()
    assert 0 < deadline.remaining_ms() <= 60000


# ==================== Plate assignment ====================

def test_decremental_prefix_drops_from_the_end():
    instance = square_instance([10, 10, 10, 10])
    seen = []

    def solve_fn(sub):
        seen.append((sub.k, sub.params.optimize_sigma))
        return fake_outcome(sub, sub.k <= 2)

    chosen, outcome = decremental_prefix(instance, [1, 2, 3], solve_fn)
    assert chosen == [1, 2]
    assert outcome.status == SolveStatus.SAT
    assert seen == [(3, False), (2, False)]


def test_decremental_prefix_single_object_never_fits():
    instance = square_instance([10, 10])
    with pytest.raises(ObjectNeverFits) as exc:
        decremental_prefix(instance, [1], lambda sub: fake_outcome(sub, False))
    assert exc.value.object_ids == ["sq1"]


def test_multi_plate_fills_plates_in_order(monkeypatch):
    monkeypatch.setattr(cegar, "solve_instance", lambda sub, factory=None: fake_outcome(sub, sub.k <= 2))
    instance = square_instance([10] * 5, optimize_sigma=False)
    plates = solve_multi_plate(instance)
    assert [p.object_ids for p in plates] == [["sq0", "sq1"], ["sq2", "sq3"], ["sq4"]]
    assert [p.plate_index for p in plates] == [0, 1, 2]
    assert all(p.outcome.sigma_star == 1 for p in plates)


def test_multi_plate_minimizes_sigma_per_plate(monkeypatch):
    monkeypatch.setattr(cegar, "solve_instance", lambda sub, factory=None: fake_outcome(sub, sub.k <= 2))
    plates = solve_multi_plate(square_instance([10] * 3))
    assert [p.outcome.sigma_star for p in plates] == [Fraction(1, 2), Fraction(1, 2)]


def test_multi_plate_reports_every_object_that_never_fits(monkeypatch):
    def fake(sub, factory=None):
        return fake_outcome(sub, all(obj.id not in ("sq1", "sq3") for obj in sub.objects))

    monkeypatch.setattr(cegar, "solve_instance", fake)
    with pytest.raises(ObjectNeverFits) as exc:
        solve_multi_plate(square_instance([10] * 4))
    assert exc.value.object_ids == ["sq1", "sq3"]


def test_multi_plate_custom_policy(monkeypatch):
    monkeypatch.setattr(cegar, "solve_instance", lambda sub, factory=None: fake_outcome(sub, True))

    def one_per_plate(instance, remaining, solve_fn):
        chosen = remaining[-1:]
        return chosen, solve_fn(instance.subset(chosen, optimize_sigma=False))

    plates = solve_multi_plate(square_instance([10] * 3, optimize_sigma=False), subset_policy=one_per_plate)
    assert [p.object_ids for p in plates] == [["sq2"], ["sq1"], ["sq0"]]


# ==================== End to end, real solver ====================

def test_two_squares_fit_unscaled(session_factory):
    instance = square_instance([20, 20], optimize_sigma=False, timeout_ms=30000)
    outcome = solve(instance, session_factory)
    assert outcome.status == SolveStatus.SAT
    assert outcome.sigma_star == 1
    assert outcome.stats.sigma_iterations == 0
    assert verify_solution(instance, outcome.placement).ok
    assert outcome.solver_name


def test_sigma_minimization_brackets_the_optimum(session_factory):
    instance = square_instance([20, 20], epsilon_xy=Fraction(1, 16), timeout_ms=60000)
    outcome = solve(instance, session_factory)
    assert outcome.status == SolveStatus.SAT
    assert outcome.stats.search_complete
    assert outcome.sigma_star < 1
    assert outcome.sigma_star - outcome.sigma_lower <= Fraction(1, 16)
    assert outcome.stats.sigma_iterations > 0
    assert verify_solution(instance, outcome.placement, outcome.sigma_star).ok
    # two 20-wide hulls plus the 5 gap the nozzle needs cannot fit in 40
    assert outcome.sigma_star > Fraction(40, 100)


def test_oversized_object_is_unsat(oversized, session_factory):
    outcome = solve(oversized, session_factory)
    assert outcome.status == SolveStatus.UNSAT
    assert outcome.placement is None


def test_eager_and_lazy_agree(session_factory):
    instance = square_instance([10, 15, 20], optimize_sigma=False, timeout_ms=60000)
    lazy = solve(instance, session_factory)
    eager = solve_eager(instance, session_factory)
    assert lazy.status == eager.status == SolveStatus.SAT
    assert verify_solution(instance, eager.placement).ok
    assert verify_solution(instance, lazy.placement).ok
    assert lazy.stats.constraints_added < eager_lni_count(instance)


def test_solve_instance_dispatches_on_mode(session_factory):
    instance = square_instance([10, 10], mode="eager", optimize_sigma=False, timeout_ms=30000)
    outcome = solve_instance(instance, session_factory)
    assert outcome.status == SolveStatus.SAT


def test_thin_triangles_are_certified(thin_triangles, session_factory):
    instance = thin_triangles.with_params(optimize_sigma=False, timeout_ms=60000)
    outcome = solve(instance, session_factory)
    assert outcome.status == SolveStatus.SAT
    assert verify_solution(instance, outcome.placement).ok


@pytest.mark.slow
def test_multi_plate_spills_to_a_second_plate(session_factory):
    instance = square_instance([20, 20], plate=(30, 30), optimize_sigma=False, timeout_ms=30000)
    plates = solve_multi_plate(instance, session_factory)
    assert [p.object_ids for p in plates] == [["sq0"], ["sq1"]]


def test_multi_plate_rejects_object_larger_than_plate(oversized, session_factory):
    with pytest.raises(ObjectNeverFits):
        solve_multi_plate(oversized, session_factory)


# ==================== Loop mechanics with a scripted session ====================

class ScriptedSession:
    """Answers check() from a list of (status, positions) and records every assertion"""

    def __init__(self, answers):
        self.answers = list(answers)
        self.depth = 0
        self.base = []
        self.scoped = []
        self.declared = set()
        self.commands_sent = 0
        self.alive = True
        self.solver_info = ("scripted", "0")

    def declare(self, variables):
        self.declared.update(variables)

    def assert_base(self, tagged):
        assert self.depth == 0
        self.base.append(tagged)

    def push(self):
        self.depth += 1

    def assert_scoped(self, tagged):
        assert self.depth > 0
        self.scoped.append(tagged)

    def pop(self):
        self.depth -= 1

    def check(self, timeout_ms=None):
        status, positions = self.answers.pop(0) if len(self.answers) > 1 else self.answers[0]
        if status != SmtStatus.SAT:
            return SmtResult(status)
        model = {}
        for i, (x, y, t) in enumerate(positions):
            model.update({x_var(i): Fraction(x), y_var(i): Fraction(y), t_var(i): Fraction(t)})
        return SmtResult(SmtStatus.SAT, model=model)


CLASH = [(0, 0, 0), (12, 3, 2)]
CLEAR = [(0, 0, 0), (30, 0, 2)]


def test_refinements_are_persisted_after_the_scope_closes():
    session = ScriptedSession([(SmtStatus.SAT, CLASH), (SmtStatus.SAT, CLEAR)])
    solver = CegarSolver(square_instance([10, 10]), session)
    solver.initialize()
    base_before = len(session.base)

    result = solver.solve_bounded(Fraction(1))
    assert result.status == SolveStatus.SAT
    assert result.placement["sq1"].x == 30
    assert session.depth == 0
    assert result.refinements
    assert all(r.pair == (0, 1) for r in result.refinements)
    assert len(session.base) == base_before + len(result.refinements)
    assert solver.stats.refinement_rounds == 1


def test_repeated_violation_raises_non_termination():
    session = ScriptedSession([(SmtStatus.SAT, CLASH)])
    solver = CegarSolver(square_instance([10, 10]), session)
    solver.initialize()
    with pytest.raises(NonTermination):
        solver.solve_bounded(Fraction(1))


@pytest.mark.parametrize("answer, status", [
    (SmtStatus.UNSAT, SolveStatus.UNSAT),
    (SmtStatus.UNKNOWN, SolveStatus.TIMEOUT),
    (SmtStatus.TIMEOUT, SolveStatus.TIMEOUT),
])
def test_bounded_solve_maps_solver_answers(answer, status):
    session = ScriptedSession([(answer, None)])
    solver = CegarSolver(square_instance([10, 10]), session)
    solver.initialize()
    assert solver.solve_bounded(Fraction(1)).status == status
    assert session.depth == 0


def test_sigma_timeout_keeps_the_best_placement():
    answers = [(SmtStatus.SAT, CLEAR), (SmtStatus.SAT, CLEAR), (SmtStatus.TIMEOUT, None)]
    session = ScriptedSession(answers)
    solver = CegarSolver(square_instance([10, 10], epsilon_xy=Fraction(1, 64)), session)
    solver.initialize()
    outcome = solver.search()
    assert outcome.status == SolveStatus.SAT
    assert outcome.sigma_star == Fraction(1, 2)
    assert outcome.sigma_lower == 0
    assert outcome.stats.search_complete is False
    assert outcome.stats.sigma_iterations == 2
    assert outcome.solver_name == "scripted"


def test_initialize_declares_every_position_variable():
    session = ScriptedSession([(SmtStatus.SAT, [(45, 45, 0)])])
    solver = CegarSolver(square_instance([10]), session)
    solver.initialize()
    # a lone object has no temporal constraint, its T must still reach the model
    assert {x_var(0), y_var(0), t_var(0)} <= session.declared


# ==================== Single objects and closed-form scale ====================

def bounded_status(instance, sigma, session_factory) -> SolveStatus:
    with session_factory() as session:
        solver = CegarSolver(instance, session)
        solver.initialize()
        return solver.solve_bounded(sigma).status


def test_single_object_fits_unscaled(session_factory):
    instance = square_instance([10], optimize_sigma=False, timeout_ms=30000)
    outcome = solve(instance, session_factory)
    assert outcome.status == SolveStatus.SAT
    assert outcome.sigma_star == 1
    assert verify_solution(instance, outcome.placement).ok


@pytest.mark.parametrize("plate, side", [((100, 100), 10), ((120, 90), 12)])
def test_single_square_scale_matches_closed_form(plate, side, session_factory):
    eps = Fraction(1, 128)
    instance = square_instance([side], plate=plate, epsilon_xy=eps, timeout_ms=60000)
    outcome = solve(instance, session_factory)
    exact = max(Fraction(side, plate[0]), Fraction(side, plate[1]))

    assert outcome.status == SolveStatus.SAT
    assert outcome.stats.search_complete
    assert outcome.stats.sigma_iterations == 7
    assert outcome.sigma_lower < exact <= outcome.sigma_star
    assert outcome.sigma_star - outcome.sigma_lower <= eps
    assert verify_solution(instance, outcome.placement, outcome.sigma_star).ok
    assert bounded_status(instance, outcome.sigma_lower, session_factory) == SolveStatus.UNSAT


def test_multi_plate_keeps_two_small_objects_together(session_factory):
    instance = square_instance([10, 10], optimize_sigma=False, timeout_ms=30000)
    plates = solve_multi_plate(instance, session_factory)
    assert [p.object_ids for p in plates] == [["sq0", "sq1"]]
    assert verify_solution(instance, plates[0].outcome.placement).ok


# ==================== Acceptance suites, real solver ====================

CORPORA = {"cuboids": gen_cuboids, "complex": gen_complex}


@pytest.mark.slow
@pytest.mark.parametrize("corpus", sorted(CORPORA))
def test_every_sat_placement_is_certified(corpus, session_factory):
    params = SolverParams(optimize_sigma=False, timeout_ms=8000)
    certified = 0
    for k in range(1, 6):
        for seed in range(50):
            instance = CORPORA[corpus](k, seed, params=params)
            outcome = solve(instance, session_factory)
            if outcome.status == SolveStatus.SAT:
                assert verify_solution(instance, outcome.placement).ok, instance.name
                certified += 1
    assert certified > 0


@pytest.mark.slow
@pytest.mark.parametrize("corpus", sorted(CORPORA))
def test_lazy_and_eager_agree_on_status_and_scale(corpus, session_factory):
    eps = Fraction(1, 16)
    params = SolverParams(epsilon_xy=eps, timeout_ms=20000)
    for k in range(1, 5):
        for seed in range(3):
            instance = CORPORA[corpus](k, seed, params=params)
            lazy = solve(instance, session_factory)
            eager = solve_eager(instance, session_factory)
            if SolveStatus.TIMEOUT in (lazy.status, eager.status):
                continue
            assert lazy.status == eager.status, instance.name
            if lazy.status == SolveStatus.SAT:
                assert abs(lazy.sigma_star - eager.sigma_star) <= 2 * eps, instance.name


@pytest.mark.slow
def test_lazy_refinement_stays_below_eager_formula_size(session_factory):
    params = SolverParams(optimize_sigma=False, timeout_ms=8000)
    solved = {"lazy": 0, "eager": 0}
    for k in (4, 6):
        for seed in range(5):
            instance = gen_complex(k, seed, params=params)
            lazy = solve(instance, session_factory)
            eager = solve_eager(instance, session_factory)
            solved["lazy"] += lazy.status != SolveStatus.TIMEOUT
            solved["eager"] += eager.status != SolveStatus.TIMEOUT
            if lazy.status == SolveStatus.SAT:
                assert lazy.stats.constraints_added < eager_lni_count(instance), instance.name
    assert solved["lazy"] >= solved["eager"]


@pytest.mark.slow
def test_scale_search_drives_refinement(thin_triangles, session_factory):
    instances = [thin_triangles.with_params(timeout_ms=60000)]
    instances += [gen_complex(2, seed, params=SolverParams(epsilon_xy=Fraction(1, 16), timeout_ms=60000))
                  for seed in range(3)]
    rounds = []
    for instance in instances:
        outcome = solve(instance, session_factory)
        assert outcome.status == SolveStatus.SAT
        assert verify_solution(instance, outcome.placement, outcome.sigma_star).ok
        rounds.append(outcome.stats.refinement_rounds)
    assert any(r >= 1 for r in rounds), rounds
