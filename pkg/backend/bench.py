# =======================================================================
# Project:      SeqPack Solver
# File:         Benchmark suites and cactus data
# =======================================================================

"""
Benchmark harness.

Generates cuboid or complex-polygon instances per (k, repeat), solves each
in every requested mode on a thread pool (one solver process per solve),
re-certifies every SAT placement and writes the records as CSV plus a JSON
run manifest.
"""
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from config import settings
from constants import (
    COMPLEX_VERTEX_RANGE,
    CSV_COLUMNS,
    DESK_K_MAX,
    PROTOCOL_K_MAX,
    PROTOCOL_REPEATS,
)
from generators import GeneratorFactory
from model import Extruder, Instance, SolveStatus, SolverMode, SolverParams
from cegar import SessionFactory, solve_instance
from verify import verify_solution
from exceptions import InvalidInstance, VerificationError

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int], None]


def gen_cuboids(k: int, seed: int, extruder: Optional[Extruder] = None,
                params: Optional[SolverParams] = None) -> Instance:
    """250 x 210 plate with k random cuboid footprints"""
    return GeneratorFactory.get_generator("cuboids", extruder=extruder, params=params).generate(k, seed)


def gen_complex(k: int, seed: int, vertex_range: Tuple[int, int] = COMPLEX_VERTEX_RANGE,
                extruder: Optional[Extruder] = None, params: Optional[SolverParams] = None) -> Instance:
    """250 x 210 plate with k random convex polygons"""
    return GeneratorFactory.get_generator(
        "complex", extruder=extruder, params=params, vertex_range=vertex_range
    ).generate(k, seed)


def instance_seed(base: int, k: int, repeat: int) -> int:
    return base * 100_000 + k * 100 + repeat


@dataclass(frozen=True)
class BenchConfig:
    corpus: str = "cuboids"
    k_min: int = 1
    k_max: int = DESK_K_MAX
    repeats: int = PROTOCOL_REPEATS
    timeout_ms: int = 8000
    modes: Tuple[SolverMode, ...] = (SolverMode.CEGAR, SolverMode.EAGER)
    seed: int = 0
    workers: int = field(default_factory=lambda: settings.BENCH_WORKERS)
    optimize_sigma: bool = True

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(SolverMode(m) for m in self.modes))
        if not 1 <= self.k_min <= self.k_max:
            raise InvalidInstance(f"Bad k range [{self.k_min}, {self.k_max}]")
        if self.repeats < 1 or self.timeout_ms <= 0 or self.workers < 1:
            raise InvalidInstance("repeats, timeout_ms and workers must be positive")
        if not self.modes:
            raise InvalidInstance("At least one solver mode is needed")

    @classmethod
    def full_protocol(cls, **overrides) -> "BenchConfig":
        """k from 1 to 32, 10 instances each, 8 s per solve"""
        values = dict(k_min=1, k_max=PROTOCOL_K_MAX, repeats=PROTOCOL_REPEATS, timeout_ms=8000)
        values.update(overrides)
        return cls(**values)

    def seeds(self) -> List[Tuple[int, int, int]]:
        """(k, repeat, seed) for every instance of the suite"""
        return [
            (k, r, instance_seed(self.seed, k, r))
            for k in range(self.k_min, self.k_max + 1)
            for r in range(self.repeats)
        ]

    def instances(self) -> List[Instance]:
        params = SolverParams(timeout_ms=self.timeout_ms, optimize_sigma=self.optimize_sigma)
        generator = GeneratorFactory.get_generator(self.corpus, params=params)
        return [generator.generate(k, seed) for k, _, seed in self.seeds()]


@dataclass
class BenchRecord:
    instance_id: str
    k: int
    mode: str
    status: str
    wall_ms: int
    refinement_rounds: int
    sigma_star: Optional[str]
    constraints_added: int = 0
    solver_name: str = ""
    solver_version: str = ""

    def row(self) -> Dict[str, Union[str, int]]:
        values = asdict(self)
        values["sigma_star"] = self.sigma_star or ""
        return {column: values[column] for column in CSV_COLUMNS}

    @property
    def solved(self) -> bool:
        return self.status in (SolveStatus.SAT.value, SolveStatus.UNSAT.value)


def run_one(instance: Instance, mode: SolverMode, session_factory: Optional[SessionFactory] = None) -> BenchRecord:
    """
    Solve one instance in one mode and re-certify a SAT answer.

    Raises:
        VerificationError: If a SAT placement fails verification
    """
    prepared = instance.with_params(mode=mode)
    outcome = solve_instance(prepared, session_factory)
    if outcome.status == SolveStatus.SAT:
        report = verify_solution(prepared, outcome.placement, outcome.sigma_star)
        if not report.ok:
            raise VerificationError(f"Uncertified result for {instance.name} in {mode.value} mode",
                                    details=str(report.to_dict()))
    return BenchRecord(
        instance_id=instance.name,
        k=instance.k,
        mode=mode.value,
        status=outcome.status.value,
        wall_ms=outcome.stats.wall_ms,
        refinement_rounds=outcome.stats.refinement_rounds,
        sigma_star=str(outcome.sigma_star) if outcome.sigma_star is not None else None,
        constraints_added=outcome.stats.constraints_added,
        solver_name=outcome.solver_name,
        solver_version=outcome.solver_version,
    )


def run_suite(
    config: BenchConfig,
    session_factory: Optional[SessionFactory] = None,
    progress: Optional[ProgressCallback] = None,
    instances: Optional[Sequence[Instance]] = None,
) -> List[BenchRecord]:
    """
    Run every (instance, mode) pair of the suite.

    Args:
        config: Suite definition
        session_factory: Solver sessions to use (default: configured solver)
        progress: Called with (done, total) after each solve
        instances: Pre-built corpus replacing config.instances()

    Returns:
        One record per (instance, mode), ordered by instance id then mode
    """
    corpus = list(instances) if instances is not None else config.instances()
    tasks = [(inst, mode) for inst in corpus for mode in config.modes]
    logger.info(f"Bench suite: {len(corpus)} instances x {len(config.modes)} modes, {config.workers} workers")

    records: List[BenchRecord] = []
    done = 0
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(run_one, inst, mode, session_factory) for inst, mode in tasks]
        for future in as_completed(futures):
            records.append(future.result())
            done += 1
            if progress:
                progress(done, len(tasks))
            if done % 10 == 0 or done == len(tasks):
                logger.info(f"Bench progress: {done}/{len(tasks)}")

    order = {inst.name: n for n, inst in enumerate(corpus)}
    records.sort(key=lambda r: (order[r.instance_id], r.mode))
    return records


def cactus_series(records: Sequence[BenchRecord]) -> Dict[str, List[int]]:
    """Per mode, ascending runtimes of the solved (SAT or UNSAT) instances"""
    series: Dict[str, List[int]] = {}
    for record in records:
        series.setdefault(record.mode, [])
        if record.solved:
            series[record.mode].append(record.wall_ms)
    return {mode: sorted(times) for mode, times in sorted(series.items())}


def solved_count(records: Sequence[BenchRecord], mode: SolverMode) -> int:
    return sum(1 for r in records if r.mode == SolverMode(mode).value and r.solved)


def status_disagreements(records: Sequence[BenchRecord]) -> List[str]:
    """Instance ids where two modes answered SAT and UNSAT differently (timeouts ignored)"""
    answers: Dict[str, set] = {}
    for record in records:
        if record.solved:
            answers.setdefault(record.instance_id, set()).add(record.status)
    return sorted(iid for iid, statuses in answers.items() if len(statuses) > 1)


def write_csv(records: Sequence[BenchRecord], path: Union[str, Path]) -> Path:
    """CSV with per-mode rows, solved runs first in ascending wall time"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: (r.mode, not r.solved, r.wall_ms, r.instance_id))
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for record in ordered:
            writer.writerow(record.row())
    logger.info(f"Wrote {len(ordered)} bench records to {path}")
    return path


def write_manifest(
    config: BenchConfig,
    records: Sequence[BenchRecord],
    path: Union[str, Path],
    solver: Optional[Tuple[str, str]] = None,
) -> Path:
    """JSON echo of the config, the seeds used and the per-mode tallies"""
    if solver is None:
        first = records[0] if records else None
        solver = (first.solver_name, first.solver_version) if first else ("", "")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tallies: Dict[str, Dict[str, int]] = {}
    for record in records:
        tallies.setdefault(record.mode, {}).setdefault(record.status, 0)
        tallies[record.mode][record.status] += 1
    config_doc = asdict(config)
    config_doc["modes"] = [m.value for m in config.modes]
    manifest = {
        "created_at": datetime.now().isoformat(),
        "config": config_doc,
        "seeds": [{"k": k, "repeat": r, "seed": s} for k, r, s in config.seeds()],
        "solver": {"name": solver[0], "version": solver[1]},
        "records": len(records),
        "tallies": tallies,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path
