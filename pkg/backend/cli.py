# =======================================================================
# Project:      SeqPack Solver
# File:         Command-line interface
# =======================================================================

"""
seqpack command line.

    python cli.py solve  INSTANCE [--mode cegar|eager] [--out solution.json]
    python cli.py verify INSTANCE SOLUTION [--sigma S] [--strict]
    python cli.py render INSTANCE SOLUTION --out plate.svg
    python cli.py bench  [--corpus cuboids|complex] [--k-max 16] [--out-dir runs]
    python cli.py generate cuboids 8 --seed 3 --out inst.json
    python cli.py serve

Exit codes: 0 SAT / ok, 1 UNSAT, 2 TIMEOUT, 3 input error, 4 solver error,
5 verification failed.
"""
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional
import logging

import typer
from rich.console import Console
from rich.table import Table

from config import settings, solver_command
from constants import (
    EXIT_INPUT_ERROR,
    EXIT_SAT,
    EXIT_SOLVER_ERROR,
    EXIT_TIMEOUT,
    EXIT_UNSAT,
    EXIT_VERIFY_FAILED,
)
from bench import BenchConfig, run_suite, solved_count, status_disagreements, write_csv, write_manifest
from cegar import PlateAssignment, default_session_factory, solve_instance, solve_multi_plate
from formats import (
    SolutionFile,
    build_solution_file,
    check_consistent,
    dump_instance,
    dump_solution,
    load_instance,
    load_solution,
    placement_from_solution,
    plate_instance,
)
from generators import GeneratorFactory
from geometry import to_rat
from model import Instance, SolveStatus, SolverMode
from render import render_svg
from verify import VerifyReport, verify_solution
from exceptions import (
    FormatError,
    GeometryError,
    InstanceParseError,
    ModelError,
    ObjectNeverFits,
    SeqPackException,
    VerificationError,
)

logger = logging.getLogger(__name__)

app = typer.Typer(help="Sequential print-plate packing and scheduling solver", no_args_is_help=True)
console = Console(stderr=True)

STATUS_EXIT = {
    SolveStatus.SAT: EXIT_SAT,
    SolveStatus.UNSAT: EXIT_UNSAT,
    SolveStatus.TIMEOUT: EXIT_TIMEOUT,
}


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, ObjectNeverFits):
        return EXIT_UNSAT
    if isinstance(exc, VerificationError):
        return EXIT_VERIFY_FAILED
    if isinstance(exc, (FormatError, ModelError, GeometryError, OSError)):
        return EXIT_INPUT_ERROR
    # SolverError, CegarError and the encoder's errors
    return EXIT_SOLVER_ERROR


@contextmanager
def handle_errors():
    """Turn application errors into a message and the matching exit code"""
    try:
        yield
    except (SeqPackException, OSError) as e:
        code = exit_code_for(e)
        message = e.message if isinstance(e, SeqPackException) else str(e)
        console.print(f"[red]error:[/red] {message}")
        if isinstance(e, InstanceParseError) and e.line is not None:
            console.print(f"  at line {e.line}, column {e.column}")
        if isinstance(e, SeqPackException) and e.details:
            console.print(f"  {e.details}")
        logger.debug(f"Exit {code} after {type(e).__name__}")
        raise typer.Exit(code)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def apply_flags(instance: Instance, **flags) -> Instance:
    """Command-line flags override the params stored in the instance file"""
    changes = {key: value for key, value in flags.items() if value is not None}
    for key in ("epsilon_xy", "epsilon_t"):
        if key in changes:
            changes[key] = to_rat(changes[key])
    return instance.with_params(**changes) if changes else instance


def certify(instance: Instance, solution: SolutionFile, strict: bool = False) -> List[VerifyReport]:
    """
    Verify every plate of a SAT solution document.

    Raises:
        VerificationError: If the solution is not SAT or a plate fails
    """
    if solution.status != SolveStatus.SAT:
        raise VerificationError(f"Solution status is {solution.status.value}, nothing to verify")
    check_consistent(instance, solution)
    reports = []
    for plate in solution.plates:
        sigma = to_rat(plate.sigma_star) if plate.sigma_star is not None else 1
        reports.append(verify_solution(plate_instance(instance, plate), placement_from_solution(plate), sigma,
                                       allow_touching=not strict))
    return reports


def _print_reports(solution: SolutionFile, reports: List[VerifyReport]) -> None:
    table = Table(title=f"Verification of {solution.instance}")
    table.add_column("plate", justify="right")
    table.add_column("sigma")
    table.add_column("result")
    table.add_column("violations")
    for plate, report in zip(solution.plates, reports):
        violations = "; ".join(f"{v.kind.value} {','.join(v.object_ids)}" for v in report.violations)
        table.add_row(str(plate.plate_index), str(report.sigma),
                      "[green]ok[/green]" if report.ok else "[red]FAILED[/red]", violations or "-")
    console.print(table)


@app.command()
def solve(
    instance_path: Path = typer.Argument(..., metavar="INSTANCE", help="Instance JSON file"),
    mode: Optional[SolverMode] = typer.Option(None, "--mode", case_sensitive=False, help="cegar or eager"),
    sigma_opt: Optional[bool] = typer.Option(None, "--sigma-opt/--no-sigma-opt", help="Minimize the plate scale"),
    epsilon_xy: Optional[str] = typer.Option(None, "--epsilon-xy", help="Scale search granularity, e.g. 1/128"),
    epsilon_t: Optional[str] = typer.Option(None, "--epsilon-t", help="Minimum print time separation"),
    timeout_ms: Optional[int] = typer.Option(None, "--timeout-ms", min=1, help="Wall-clock budget per solve"),
    solver_cmd: Optional[str] = typer.Option(None, "--solver-cmd", help="SMT-LIB solver command line"),
    multi_plate: bool = typer.Option(False, "--multi-plate", help="Spill objects onto further plates"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Solution file (stdout when omitted)"),
):
    """Place and order the objects of an instance."""
    with handle_errors():
        instance = apply_flags(
            load_instance(instance_path),
            mode=mode,
            optimize_sigma=sigma_opt,
            epsilon_xy=epsilon_xy,
            epsilon_t=epsilon_t,
            timeout_ms=timeout_ms,
        )
        session_factory = default_session_factory(solver_command(solver_cmd))
        if multi_plate:
            plates = solve_multi_plate(instance, session_factory)
        else:
            outcome = solve_instance(instance, session_factory)
            plates = [PlateAssignment(0, [o.id for o in instance.objects], outcome)]
        solution = build_solution_file(instance, plates)

        if solution.status == SolveStatus.SAT:
            reports = certify(instance, solution)
            if not all(r.ok for r in reports):
                _print_reports(solution, reports)
                raise VerificationError("Solver placement failed certification; nothing written")
            text = dump_solution(solution)
            if out:
                out.parent.mkdir(parents=True, exist_ok=True)
                out.write_text(text, encoding="utf-8")
                console.print(f"Solution written to {out}")
            else:
                typer.echo(text, nl=False)

        for plate in solution.plates:
            complete = "" if plate.stats.search_complete else " (scale search incomplete)"
            console.print(f"plate {plate.plate_index}: [bold]{plate.status.value}[/bold] "
                          f"sigma*={plate.sigma_star} rounds={plate.stats.refinement_rounds} "
                          f"{plate.stats.wall_ms} ms{complete}")
    raise typer.Exit(STATUS_EXIT[solution.status])


@app.command()
def verify(
    instance_path: Path = typer.Argument(..., metavar="INSTANCE"),
    solution_path: Path = typer.Argument(..., metavar="SOLUTION"),
    sigma: Optional[str] = typer.Option(None, "--sigma", help="Check against this plate scale instead of sigma*"),
    strict: bool = typer.Option(False, "--strict", help="Count touching contact as overlap"),
):
    """Check a solution file against its instance."""
    with handle_errors():
        instance = load_instance(instance_path)
        solution = load_solution(solution_path)
        if sigma is not None:
            for plate in solution.plates:
                plate.sigma_star = sigma
        reports = certify(instance, solution, strict=strict)
    _print_reports(solution, reports)
    raise typer.Exit(EXIT_SAT if all(r.ok for r in reports) else EXIT_VERIFY_FAILED)


@app.command()
def render(
    instance_path: Path = typer.Argument(..., metavar="INSTANCE"),
    solution_path: Path = typer.Argument(..., metavar="SOLUTION"),
    out: Path = typer.Option(..., "--out", "-o", help="SVG file; multi-plate solutions get a -plateN suffix"),
):
    """Draw each plate of a certified solution as SVG."""
    with handle_errors():
        instance = load_instance(instance_path)
        solution = load_solution(solution_path)
        reports = certify(instance, solution)
        if not all(r.ok for r in reports):
            _print_reports(solution, reports)
            raise VerificationError("Refusing to render a solution that fails verification")

        out.parent.mkdir(parents=True, exist_ok=True)
        for plate in solution.plates:
            target = out if len(solution.plates) == 1 else out.with_name(f"{out.stem}-plate{plate.plate_index}{out.suffix}")
            sigma = to_rat(plate.sigma_star) if plate.sigma_star is not None else 1
            target.write_text(render_svg(plate_instance(instance, plate), placement_from_solution(plate), sigma),
                              encoding="utf-8")
            console.print(f"Rendered plate {plate.plate_index} to {target}")


@app.command()
def bench(
    corpus: str = typer.Option("cuboids", "--corpus", help="cuboids or complex"),
    k_min: int = typer.Option(1, "--k-min", min=1),
    k_max: Optional[int] = typer.Option(None, "--k-max", min=1),
    repeats: Optional[int] = typer.Option(None, "--repeats", min=1),
    timeout_ms: int = typer.Option(8000, "--timeout-ms", min=1),
    modes: List[SolverMode] = typer.Option([SolverMode.CEGAR, SolverMode.EAGER], "--mode", case_sensitive=False),
    seed: int = typer.Option(0, "--seed"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1),
    sigma_opt: bool = typer.Option(True, "--sigma-opt/--no-sigma-opt"),
    full_protocol: bool = typer.Option(False, "--full-protocol", help="k from 1 to 32, 10 instances per k"),
    solver_cmd: Optional[str] = typer.Option(None, "--solver-cmd"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", help="Where the CSV and manifest go"),
    save_instances: bool = typer.Option(False, "--save-instances", help="Also write every generated instance"),
):
    """Run a benchmark suite and write CSV plus a run manifest."""
    with handle_errors():
        values = dict(corpus=corpus, k_min=k_min, timeout_ms=timeout_ms, modes=tuple(modes), seed=seed,
                      optimize_sigma=sigma_opt)
        for key, value in (("k_max", k_max), ("repeats", repeats), ("workers", workers)):
            if value is not None:
                values[key] = value
        config = BenchConfig.full_protocol(**values) if full_protocol else BenchConfig(**values)

        target = out_dir or Path(settings.BENCH_OUTPUT_DIR)
        stem = f"{config.corpus}-k{config.k_min}-{config.k_max}-s{config.seed}"
        corpus_instances = config.instances()
        if save_instances:
            instance_dir = target / stem
            instance_dir.mkdir(parents=True, exist_ok=True)
            for inst in corpus_instances:
                (instance_dir / f"{inst.name}.json").write_text(dump_instance(inst), encoding="utf-8")

        records = run_suite(config, default_session_factory(solver_command(solver_cmd)),
                            instances=corpus_instances)
        csv_path = write_csv(records, target / f"{stem}.csv")
        manifest_path = write_manifest(config, records, target / f"{stem}.manifest.json")

    table = Table(title=f"Bench {stem}")
    table.add_column("mode")
    table.add_column("solved", justify="right")
    table.add_column("runs", justify="right")
    for m in config.modes:
        table.add_row(m.value, str(solved_count(records, m)), str(sum(1 for r in records if r.mode == m.value)))
    console.print(table)
    disagreements = status_disagreements(records)
    if disagreements:
        console.print(f"[red]Modes disagree on:[/red] {', '.join(disagreements)}")
    console.print(f"Records: {csv_path}\nManifest: {manifest_path}")


@app.command()
def generate(
    corpus: str = typer.Argument(..., help="cuboids or complex"),
    k: int = typer.Argument(..., min=1, help="Number of objects"),
    seed: int = typer.Option(0, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o"),
):
    """Write a generated instance file."""
    with handle_errors():
        instance = GeneratorFactory.get_generator(corpus).generate(k, seed)
        text = dump_instance(instance)
        if out:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text, encoding="utf-8")
            console.print(f"Instance {instance.name} written to {out}")
        else:
            typer.echo(text, nl=False)


@app.command()
def serve(
    host: str = typer.Option("0.0.0.0", "--host"),
    port: int = typer.Option(settings.API_PORT, "--port"),
):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("main:app", host=host, port=port, log_level="info")


if __name__ == "__main__":
    app()
