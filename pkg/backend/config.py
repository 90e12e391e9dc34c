# =======================================================================
# Project:      SeqPack Solver
# File:         Backend configuration settings
# =======================================================================

import os
import shlex
import shutil
import sys
import sysconfig
from typing import List, Optional
from pydantic_settings import BaseSettings
from pydantic import Field
import logging

logger = logging.getLogger(__name__)


def _interpreter_scripts_dirs() -> List[str]:
    """Script directories of the running interpreter; pip puts the z3-solver binary there"""
    dirs = [sysconfig.get_path("scripts"), os.path.dirname(sys.executable)]
    return list(dict.fromkeys(d for d in dirs if d))


def detect_solver() -> str:
    """
    Auto-detect an SMT-LIB solver usable in interactive mode.
    Priority: z3 on PATH > cvc5 on PATH > z3 installed by the z3-solver wheel
    into this interpreter's scripts directory (found even when the venv is not activated)
    """
    z3_path = shutil.which("z3")
    if z3_path:
        logger.info(f"SMT solver detected: z3 ({z3_path})")
        return f"{shlex.quote(z3_path)} -in -smt2"

    cvc5_path = shutil.which("cvc5")
    if cvc5_path:
        logger.info(f"SMT solver detected: cvc5 ({cvc5_path})")
        return f"{shlex.quote(cvc5_path)} --incremental --lang smt2"

    for scripts_dir in _interpreter_scripts_dirs():
        candidate = shutil.which("z3", path=scripts_dir)
        if candidate:
            logger.info(f"SMT solver detected: z3 from the interpreter scripts directory ({candidate})")
            return f"{shlex.quote(candidate)} -in -smt2"

    logger.warning("No SMT solver found; set SOLVER_CMD to an SMT-LIB solver in interactive mode")
    return "auto"


class Settings(BaseSettings):
    # SMT solver process
    SOLVER_CMD: str = Field(default="auto", description="SMT-LIB solver command line, or 'auto' to detect")
    SOLVER_TIMEOUT_OPTION: str = Field(
        default=":timeout",
        description="Solver option (milliseconds) used to bound a single check-sat; empty to disable"
    )
    SOLVER_HANDSHAKE_MS: int = Field(default=5000, description="Time allowed for the solver to answer its first command")
    SOLVER_GRACE_MS: int = Field(
        default=2000,
        description="Extra wall-clock time granted past a check deadline before the process is killed"
    )

    # Solver parameters
    TIMEOUT_MS: int = Field(default=8000, description="Wall-clock budget of one solve in milliseconds")
    EPSILON_T: str = Field(default="1", description="Minimum separation between print times (rational)")
    EPSILON_XY: str = Field(default="1/128", description="Granularity of the plate-scale binary search (rational)")
    EXTRUDER_HALF_SIZE: int = Field(default=8, description="Half side (mm) of the default square extruder footprint")

    # Benchmarks
    BENCH_WORKERS: int = Field(default=2, description="Concurrent solves in a benchmark suite")
    BENCH_OUTPUT_DIR: str = Field(default="runs", description="Directory for benchmark CSV and manifest files")

    # Logging
    LOG_LEVEL: str = Field(default="INFO", description="Root logging level")

    # HTTP service
    API_PORT: int = Field(default=8000, description="Port used by the native start script")
    CORS_ORIGINS: List[str] = Field(
        default=["http://localhost:8001", "http://127.0.0.1:8001"],
        description="Allowed CORS origins. Use ['*'] to allow all (not recommended for production)"
    )
    JOB_MAX_AGE_HOURS: int = Field(default=24, description="Finished jobs older than this are dropped")

    class Config:
        env_file = "../.env"  # Look in project root, not backend/
        env_file_encoding = "utf-8"
        case_sensitive = True


def solver_command(override: Optional[str] = None) -> List[str]:
    """
    Resolve the solver command line. A command-line flag wins over SOLVER_CMD.
    Returns an empty list when nothing usable is configured.
    """
    command = override or settings.SOLVER_CMD
    if not command or command == "auto":
        return []
    return shlex.split(command)


# Create global settings instance
settings = Settings()

# Resolve solver if set to auto
if settings.SOLVER_CMD == "auto":
    settings.SOLVER_CMD = detect_solver()
else:
    logger.info(f"Using manually configured solver: {settings.SOLVER_CMD}")
