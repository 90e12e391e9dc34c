# =======================================================================
# Project:      SeqPack Solver
# File:         Shared test fixtures
# =======================================================================

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
BACKEND = ROOT / "backend"
sys.path.insert(0, str(BACKEND))

from config import solver_command as configured_solver  # noqa: E402
from formats import load_instance  # noqa: E402
from geometry import ConvexPolygon  # noqa: E402
from model import Extruder, Instance, Plate, PrintObject, SolverParams  # noqa: E402

INSTANCES = ROOT / "data" / "instances"


def square_instance(sides, plate=(100, 100), half_size=5, **params) -> Instance:
    """Instance with one square footprint per entry of sides"""
    return Instance(
        plate=Plate.rectangle(*plate),
        extruder=Extruder.square(half_size),
        objects=tuple(PrintObject(f"sq{n}", ConvexPolygon.rectangle(s, s)) for n, s in enumerate(sides)),
        params=SolverParams(**params),
        name="squares",
    )


@pytest.fixture
def instances_dir() -> Path:
    return INSTANCES


@pytest.fixture
def two_squares() -> Instance:
    return load_instance(INSTANCES / "two-squares.json")


@pytest.fixture
def oversized() -> Instance:
    return load_instance(INSTANCES / "oversized.json")


@pytest.fixture
def thin_triangles() -> Instance:
    return load_instance(INSTANCES / "thin-triangles.json")


@pytest.fixture(scope="session")
def solver_command():
    """Command line of a working SMT solver; skips the test when none is installed"""
    command = configured_solver()
    if not command:
        pytest.skip("no SMT solver available (install z3 or cvc5, or set SOLVER_CMD)")
    return command


@pytest.fixture
def session_factory(solver_command):
    from cegar import default_session_factory

    return default_session_factory(solver_command)
