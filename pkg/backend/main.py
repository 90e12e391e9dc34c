# =======================================================================
# Project:      SeqPack Solver
# File:         FastAPI application and API endpoints
# =======================================================================

from fastapi import FastAPI, HTTPException, Request, BackgroundTasks
from fastapi.responses import JSONResponse, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import Optional, List, Dict, Any
from contextlib import asynccontextmanager
import logging
import uvicorn
import uuid

# Import backend modules
from config import settings, solver_command
from bench import BenchConfig, cactus_series, run_suite, status_disagreements
from cegar import PlateAssignment, solve_instance, solve_multi_plate
from formats import (
    InstanceFile,
    SolutionFile,
    build_solution_file,
    check_consistent,
    instance_from_document,
    placement_from_solution,
    plate_instance,
)
from generators import GeneratorFactory
from model import Instance, SolverMode, SolveStatus
from render import render_svg
from smt import open_session
from verify import verify_solution
from geometry import to_rat
from exceptions import (
    SeqPackException,
    GeometryError,
    ModelError,
    SolverError,
    CegarError,
    VerificationError,
    FormatError,
)
from jobs import create_job, update_job, get_job, list_jobs, cleanup_old_jobs, JobStatus, JobType

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Solver identity, probed once at startup
_solver_info = {"name": "", "version": "", "available": False}


def probe_solver() -> Dict[str, Any]:
    """Start the configured solver once and record its name and version"""
    try:
        with open_session(solver_command()) as session:
            _solver_info.update(name=session.name, version=session.version, available=True)
            logger.info(f"Solver available: {session.name} {session.version}")
    except SolverError as e:
        _solver_info.update(name="", version="", available=False)
        logger.warning(f"Solver unavailable: {e.message}")
    return _solver_info


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan events: startup and shutdown"""
    logger.info(f"Probing SMT solver: {settings.SOLVER_CMD}")
    probe_solver()
    yield
    logger.info("Shutting down...")


# Initialize FastAPI app with lifespan
app = FastAPI(
    title="SeqPack Solver API",
    description="Sequential print-plate packing and scheduling",
    version="1.0.0",
    lifespan=lifespan
)

# Configure CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def error_code_for(exc: SeqPackException) -> str:
    if isinstance(exc, FormatError):
        return "INVALID_FORMAT"
    if isinstance(exc, (ModelError, GeometryError)):
        return "INVALID_INSTANCE"
    if isinstance(exc, VerificationError):
        return "VERIFICATION_FAILED"
    if isinstance(exc, SolverError):
        return "SOLVER_UNAVAILABLE"
    if isinstance(exc, CegarError):
        return "SOLVE_FAILED"
    return "INTERNAL_ERROR"


# Exception Handlers
@app.exception_handler(FormatError)
async def format_handler(request: Request, exc: FormatError):
    return JSONResponse(
        status_code=400,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )

@app.exception_handler(ModelError)
async def model_handler(request: Request, exc: ModelError):
    return JSONResponse(
        status_code=422,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )

@app.exception_handler(GeometryError)
async def geometry_handler(request: Request, exc: GeometryError):
    return JSONResponse(
        status_code=422,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )

@app.exception_handler(VerificationError)
async def verification_handler(request: Request, exc: VerificationError):
    return JSONResponse(
        status_code=422,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )

@app.exception_handler(SolverError)
async def solver_handler(request: Request, exc: SolverError):
    logger.error(f"Solver error: {exc.message} ({exc.details})")
    return JSONResponse(
        status_code=503,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )

@app.exception_handler(CegarError)
async def cegar_handler(request: Request, exc: CegarError):
    return JSONResponse(
        status_code=500,
        content={"detail": exc.message, "error_code": error_code_for(exc)}
    )


class SolveRequest(BaseModel):
    instance: InstanceFile
    mode: Optional[SolverMode] = None
    optimize_sigma: Optional[bool] = None
    timeout_ms: Optional[int] = Field(default=None, gt=0)
    epsilon_xy: Optional[str] = None
    epsilon_t: Optional[str] = None
    multi_plate: bool = False

class VerifyRequest(BaseModel):
    instance: InstanceFile
    solution: SolutionFile
    sigma: Optional[str] = None
    strict: bool = False

class RenderRequest(BaseModel):
    instance: InstanceFile
    solution: SolutionFile
    plate_index: int = 0

class BenchRequest(BaseModel):
    corpus: str = "cuboids"
    k_min: int = Field(default=1, ge=1)
    k_max: int = Field(default=4, ge=1)
    repeats: int = Field(default=2, ge=1)
    timeout_ms: int = Field(default=8000, gt=0)
    modes: List[SolverMode] = [SolverMode.CEGAR, SolverMode.EAGER]
    seed: int = 0
    optimize_sigma: bool = True


def apply_overrides(instance: Instance, **overrides) -> Instance:
    """Replace instance params with the overrides that are set"""
    changes = {key: value for key, value in overrides.items() if value is not None}
    for key in ("epsilon_xy", "epsilon_t"):
        if key in changes:
            changes[key] = to_rat(changes[key])
    return instance.with_params(**changes) if changes else instance


@app.get("/health")
async def health_check():
    """Health check endpoint to verify the API is running"""
    logger.info("Health check endpoint called")
    return {
        "status": "healthy",
        "message": "SeqPack Solver API is running",
        "version": "1.0.0",
        "solver": dict(_solver_info)
    }

@app.get("/config/defaults")
async def get_defaults():
    """Solver parameters used when an instance does not set them"""
    return {
        "timeout_ms": settings.TIMEOUT_MS,
        "epsilon_t": settings.EPSILON_T,
        "epsilon_xy": settings.EPSILON_XY,
        "extruder_half_size": settings.EXTRUDER_HALF_SIZE,
        "modes": [m.value for m in SolverMode],
        "generators": GeneratorFactory.names()
    }

@app.get("/")
async def root():
    """Root endpoint"""
    return {
        "message": "Welcome to SeqPack Solver API",
        "docs": "/docs",
        "health": "/health"
    }


# ==================== Solve ====================

@app.post("/solve")
async def start_solve(req: SolveRequest, background_tasks: BackgroundTasks):
    """
    Solve an instance in the background.
    Returns immediately with a job_id for status polling.
    """
    instance = apply_overrides(
        instance_from_document(req.instance),
        mode=req.mode,
        optimize_sigma=req.optimize_sigma,
        timeout_ms=req.timeout_ms,
        epsilon_xy=req.epsilon_xy,
        epsilon_t=req.epsilon_t,
    )
    cleanup_old_jobs(settings.JOB_MAX_AGE_HOURS)
    job_id = str(uuid.uuid4())
    create_job(job_id, JobType.SOLVE, metadata={"instance": instance.name, "k": instance.k,
                                                 "multi_plate": req.multi_plate})
    background_tasks.add_task(run_solve_job, job_id, instance, req.multi_plate)

    return {
        "job_id": job_id,
        "status": "started",
        "message": "Solve job started. Use /api/jobs/{job_id} to check status."
    }


def run_solve_job(job_id: str, instance: Instance, multi_plate: bool):
    """Background task to run one solve (or a multi-plate schedule)."""
    try:
        update_job(job_id, status=JobStatus.RUNNING, progress=0)
        if multi_plate:
            plates = solve_multi_plate(instance)
        else:
            outcome = solve_instance(instance)
            plates = [PlateAssignment(0, [o.id for o in instance.objects], outcome)]
        solution = build_solution_file(instance, plates)
        update_job(job_id, status=JobStatus.COMPLETED, progress=100, result=solution.model_dump(mode="json"))
    except SeqPackException as e:
        logger.error(f"Solve job {job_id} failed: {e.message}")
        update_job(job_id, status=JobStatus.FAILED, error=e.message, error_code=error_code_for(e))
    except Exception as e:
        logger.error(f"Solve job {job_id} failed: {e}")
        update_job(job_id, status=JobStatus.FAILED, error=str(e), error_code="INTERNAL_ERROR")


# ==================== Verify and render ====================

@app.post("/verify")
async def verify(req: VerifyRequest):
    """Certify every plate of a solution against its instance"""
    instance = instance_from_document(req.instance)
    if req.solution.status != SolveStatus.SAT:
        raise VerificationError(f"Solution status is {req.solution.status.value}, nothing to verify")
    check_consistent(instance, req.solution)
    reports = []
    for plate in req.solution.plates:
        sigma = to_rat(req.sigma) if req.sigma is not None else to_rat(plate.sigma_star or 1)
        report = verify_solution(
            plate_instance(instance, plate),
            placement_from_solution(plate),
            sigma,
            allow_touching=not req.strict,
        )
        reports.append({"plate_index": plate.plate_index, **report.to_dict()})
    return {"ok": all(r["ok"] for r in reports), "plates": reports}

@app.post("/render")
async def render(req: RenderRequest):
    """SVG picture of one plate of a solution"""
    instance = instance_from_document(req.instance)
    plates = {p.plate_index: p for p in req.solution.plates}
    plate = plates.get(req.plate_index)
    if plate is None:
        raise HTTPException(status_code=404, detail=f"Solution has no plate {req.plate_index}")
    svg = render_svg(plate_instance(instance, plate), placement_from_solution(plate), to_rat(plate.sigma_star or 1))
    return Response(content=svg, media_type="image/svg+xml")


# ==================== Bench ====================

@app.post("/bench")
async def start_bench(req: BenchRequest, background_tasks: BackgroundTasks):
    """Run a benchmark suite in the background."""
    config = BenchConfig(
        corpus=req.corpus,
        k_min=req.k_min,
        k_max=req.k_max,
        repeats=req.repeats,
        timeout_ms=req.timeout_ms,
        modes=tuple(req.modes),
        seed=req.seed,
        optimize_sigma=req.optimize_sigma,
    )
    GeneratorFactory.get_generator(config.corpus)
    cleanup_old_jobs(settings.JOB_MAX_AGE_HOURS)
    job_id = str(uuid.uuid4())
    create_job(job_id, JobType.BENCH, metadata={"corpus": config.corpus, "instances": len(config.seeds())})
    background_tasks.add_task(run_bench_job, job_id, config)

    return {
        "job_id": job_id,
        "status": "started",
        "message": "Bench job started. Use /api/jobs/{job_id} to check status."
    }


def run_bench_job(job_id: str, config: BenchConfig):
    """Background task to run a benchmark suite."""
    try:
        update_job(job_id, status=JobStatus.RUNNING, progress=0)
        records = run_suite(
            config,
            progress=lambda done, total: update_job(job_id, progress=int(done * 100 / total)),
        )
        result = {
            "records": [r.row() for r in records],
            "cactus": cactus_series(records),
            "disagreements": status_disagreements(records),
            "solved": {m.value: sum(1 for r in records if r.mode == m.value and r.solved) for m in config.modes},
        }
        update_job(job_id, status=JobStatus.COMPLETED, progress=100, result=result)
    except SeqPackException as e:
        logger.error(f"Bench job {job_id} failed: {e.message}")
        update_job(job_id, status=JobStatus.FAILED, error=e.message, error_code=error_code_for(e))
    except Exception as e:
        logger.error(f"Bench job {job_id} failed: {e}")
        update_job(job_id, status=JobStatus.FAILED, error=str(e), error_code="INTERNAL_ERROR")


# ==================== Job Status Endpoints ====================

@app.get("/api/jobs/{job_id}")
async def get_job_status(job_id: str):
    """Get the status of a background job."""
    job = get_job(job_id)
    if not job:
        raise HTTPException(status_code=404, detail="Job not found")
    return job


@app.get("/api/jobs")
async def list_all_jobs(job_type: Optional[str] = None):
    """List all recent jobs, optionally filtered by type."""
    try:
        type_filter = JobType(job_type) if job_type else None
        jobs = list_jobs(type_filter)
        return {"jobs": jobs}
    except ValueError:
        return {"jobs": list_jobs()}


if __name__ == "__main__":
    logger.info("Starting SeqPack Solver API server...")
    uvicorn.run(
        "main:app",
        host="0.0.0.0",
        port=settings.API_PORT,
        reload=True,
        log_level="info"
    )
