# =======================================================================
# Project:      SeqPack Solver
# File:         Benchmark harness tests
# =======================================================================

import csv
import json
from fractions import Fraction

import pytest

import bench
from bench import (
    BenchConfig,
    BenchRecord,
    cactus_series,
    gen_complex,
    gen_cuboids,
    instance_seed,
    run_suite,
    solved_count,
    status_disagreements,
    write_csv,
    write_manifest,
)
from model import ObjectPosition, Placement, SolveOutcome, SolveStats, SolveStatus, SolverMode
from constants import CSV_COLUMNS, PROTOCOL_K_MAX
from exceptions import InvalidInstance, VerificationError


def record(iid, mode, status, wall_ms, k=1):
    sigma = "1" if status == "sat" else None
    return BenchRecord(iid, k, mode, status, wall_ms, 0, sigma)


def stacked_outcome(instance, gap=Fraction(2)) -> SolveOutcome:
    """Every object at the origin, printed one after another"""
    positions = {obj.id: ObjectPosition(0, 0, gap * n) for n, obj in enumerate(instance.objects)}
    return SolveOutcome(
        SolveStatus.SAT,
        placement=Placement(positions),
        sigma_star=Fraction(1),
        stats=SolveStats(wall_ms=5, refinement_rounds=2),
        solver_name="fake-smt",
        solver_version="0.1",
    )


# ==================== Configuration ====================

def test_instance_seed_layout():
    assert instance_seed(3, 12, 7) == 300_000 + 1200 + 7


def test_config_seeds_and_instances():
    config = BenchConfig(k_min=2, k_max=3, repeats=2, seed=1, modes=("cegar",))
    assert config.seeds() == [(2, 0, 100200), (2, 1, 100201), (3, 0, 100300), (3, 1, 100301)]
    instances = config.instances()
    assert [i.k for i in instances] == [2, 2, 3, 3]
    assert len({i.name for i in instances}) == 4
    assert config.modes == (SolverMode.CEGAR,)
    assert instances[0].params.timeout_ms == config.timeout_ms


def test_full_protocol_defaults():
    config = BenchConfig.full_protocol(workers=1)
    assert (config.k_min, config.k_max, config.repeats, config.timeout_ms) == (1, PROTOCOL_K_MAX, 10, 8000)


@pytest.mark.parametrize("kwargs", [
    {"k_min": 0},
    {"k_min": 5, "k_max": 4},
    {"repeats": 0},
    {"timeout_ms": 0},
    {"workers": 0},
    {"modes": ()},
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidInstance):
        BenchConfig(**kwargs)


def test_corpus_helpers():
    assert gen_cuboids(4, 9) == gen_cuboids(4, 9)
    assert len(gen_complex(3, 9, vertex_range=(5, 5)).objects[0].footprint) == 5


# ==================== Running ====================

def test_run_suite_with_stub_solver(monkeypatch):
    monkeypatch.setattr(bench, "solve_instance", lambda inst, factory=None: stacked_outcome(inst))
    progress = []
    config = BenchConfig(k_min=1, k_max=1, repeats=2, workers=2)
    records = run_suite(config, progress=lambda done, total: progress.append((done, total)))

    assert len(records) == 4
    assert [r.mode for r in records] == ["cegar", "eager", "cegar", "eager"]
    assert all(r.status == "sat" and r.sigma_star == "1" for r in records)
    assert records[0].solver_name == "fake-smt"
    assert progress[-1] == (4, 4)
    assert solved_count(records, SolverMode.CEGAR) == 2


def test_run_suite_rejects_uncertified_placements(monkeypatch):
    # two stacked objects overlap, so the placement cannot be certified
    monkeypatch.setattr(bench, "solve_instance", lambda inst, factory=None: stacked_outcome(inst))
    config = BenchConfig(k_min=2, k_max=2, repeats=1, modes=("cegar",), workers=1)
    with pytest.raises(VerificationError):
        run_suite(config)


def test_run_suite_on_given_corpus(monkeypatch):
    monkeypatch.setattr(bench, "solve_instance",
                        lambda inst, factory=None: SolveOutcome(SolveStatus.TIMEOUT, stats=SolveStats(wall_ms=8000)))
    corpus = [gen_cuboids(3, 1), gen_cuboids(3, 2)]
    records = run_suite(BenchConfig(modes=("eager",), workers=1), instances=corpus)
    assert [r.instance_id for r in records] == [corpus[0].name, corpus[1].name]
    assert all(not r.solved and r.sigma_star is None for r in records)


# ==================== Reporting ====================

def test_cactus_series_and_disagreements():
    records = [
        record("a", "cegar", "sat", 30),
        record("a", "eager", "unsat", 50),
        record("b", "cegar", "sat", 10),
        record("b", "eager", "timeout", 8000),
        record("c", "cegar", "unsat", 20),
        record("c", "eager", "unsat", 25),
    ]
    assert cactus_series(records) == {"cegar": [10, 20, 30], "eager": [25, 50]}
    assert status_disagreements(records) == ["a"]
    assert solved_count(records, "eager") == 2


def test_write_csv_orders_solved_runs_first(tmp_path):
    records = [
        record("slow", "cegar", "sat", 90),
        record("lost", "cegar", "timeout", 10),
        record("fast", "cegar", "unsat", 5),
    ]
    path = write_csv(records, tmp_path / "out" / "bench.csv")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == CSV_COLUMNS
    assert [r["instance_id"] for r in rows] == ["fast", "slow", "lost"]
    assert rows[1]["sigma_star"] == "1"
    assert rows[2]["sigma_star"] == ""


def test_write_manifest(tmp_path):
    config = BenchConfig(k_min=1, k_max=2, repeats=1, modes=("cegar",), workers=1)
    records = [record("a", "cegar", "sat", 3), record("b", "cegar", "timeout", 9, k=2)]
    path = write_manifest(config, records, tmp_path / "run.manifest.json", solver=("z3", "4.15.3"))
    manifest = json.loads(path.read_text())
    assert manifest["config"]["modes"] == ["cegar"]
    assert manifest["seeds"] == [{"k": 1, "repeat": 0, "seed": 100}, {"k": 2, "repeat": 0, "seed": 200}]
    assert manifest["solver"] == {"name": "z3", "version": "4.15.3"}
    assert manifest["tallies"] == {"cegar": {"sat": 1, "timeout": 1}}
    assert manifest["records"] == 2


# ==================== Real solver ====================

def test_small_suite_with_real_solver(session_factory):
    config = BenchConfig(k_min=1, k_max=2, repeats=1, timeout_ms=20000, workers=1, optimize_sigma=False)
    records = run_suite(config, session_factory)
    assert len(records) == 4
    assert all(r.status == "sat" for r in records)
    assert status_disagreements(records) == []
