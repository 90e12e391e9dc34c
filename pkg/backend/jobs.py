# =======================================================================
# Project:      SeqPack Solver
# File:         Background job tracking for solve and bench runs
# =======================================================================

"""
Job Tracking Module - In-memory registry for background solve and bench jobs.

Bench progress is reported from worker threads, so every access goes through
the registry lock. Callers receive plain dict snapshots.
"""
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from typing import Any, Dict, List, Optional
import logging
import threading

logger = logging.getLogger(__name__)


class JobStatus(str, Enum):
    """Status values for background jobs"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class JobType(str, Enum):
    """Types of background jobs"""
    SOLVE = "solve"
    BENCH = "bench"


@dataclass
class Job:
    id: str
    type: JobType
    metadata: Dict[str, Any] = field(default_factory=dict)
    status: JobStatus = JobStatus.PENDING
    progress: int = 0
    result: Any = None
    error: Optional[str] = None
    error_code: Optional[str] = None
    created_at: datetime = field(default_factory=datetime.now)
    updated_at: datetime = field(default_factory=datetime.now)

    def snapshot(self) -> Dict[str, Any]:
        data = asdict(self)
        data["type"] = self.type.value
        data["status"] = self.status.value
        data["created_at"] = self.created_at.isoformat()
        data["updated_at"] = self.updated_at.isoformat()
        return data


class JobRegistry:
    """Thread-safe store of jobs keyed by id"""

    def __init__(self):
        self._jobs: Dict[str, Job] = {}
        self._lock = threading.Lock()

    def create(self, job_id: str, job_type: JobType, metadata: Optional[Dict] = None) -> Dict[str, Any]:
        job = Job(job_id, job_type, dict(metadata or {}))
        with self._lock:
            self._jobs[job_id] = job
            snapshot = job.snapshot()
        logger.info(f"Created {job_type.value} job {job_id}")
        return snapshot

    def update(self, job_id: str, **changes) -> Optional[Dict[str, Any]]:
        """
        Apply status/progress/result/error changes to a job.

        Progress is clamped to 0-100. None values leave a field unchanged.

        Returns:
            The updated job snapshot, or None if the id is unknown
        """
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                logger.warning(f"Attempted to update non-existent job: {job_id}")
                return None
            for name, value in changes.items():
                if value is None:
                    continue
                if name == "progress":
                    value = min(100, max(0, value))
                setattr(job, name, value)
            job.updated_at = datetime.now()
            snapshot = job.snapshot()

        logger.debug(f"Job {job_id}: {snapshot['status']} {snapshot['progress']}%")
        return snapshot

    def get(self, job_id: str) -> Optional[Dict[str, Any]]:
        with self._lock:
            job = self._jobs.get(job_id)
            return job.snapshot() if job else None

    def list(self, job_type: Optional[JobType] = None, limit: int = 50) -> List[Dict[str, Any]]:
        with self._lock:
            selected = [j for j in self._jobs.values() if job_type is None or j.type == job_type]
            selected.sort(key=lambda j: j.created_at, reverse=True)
            return [j.snapshot() for j in selected[:limit]]

    def expire(self, max_age: timedelta) -> int:
        cutoff = datetime.now() - max_age
        with self._lock:
            stale = [job_id for job_id, job in self._jobs.items() if job.created_at < cutoff]
            for job_id in stale:
                del self._jobs[job_id]
        if stale:
            logger.info(f"Expired {len(stale)} jobs older than {max_age}")
        return len(stale)

    def clear(self) -> None:
        with self._lock:
            self._jobs.clear()


registry = JobRegistry()


def create_job(job_id: str, job_type: JobType, metadata: Optional[Dict] = None) -> Dict[str, Any]:
    return registry.create(job_id, job_type, metadata)


def update_job(
    job_id: str,
    status: Optional[JobStatus] = None,
    progress: Optional[int] = None,
    result: Any = None,
    error: Optional[str] = None,
    error_code: Optional[str] = None
) -> Optional[Dict[str, Any]]:
    return registry.update(job_id, status=status, progress=progress, result=result,
                           error=error, error_code=error_code)


def get_job(job_id: str) -> Optional[Dict[str, Any]]:
    return registry.get(job_id)


def list_jobs(job_type: Optional[JobType] = None, limit: int = 50) -> List[Dict[str, Any]]:
    """List recent jobs, most recent first"""
    return registry.list(job_type, limit)


def cleanup_old_jobs(max_age_hours: int = 24) -> int:
    """Remove jobs created more than max_age_hours ago; returns how many"""
    return registry.expire(timedelta(hours=max_age_hours))
