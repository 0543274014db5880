"""
Grid Runner for parameter scans.

Features:
- Concurrent evaluation of independent grid tasks on a thread pool
  (numpy releases the GIL in the dense kernels)
- Results merged by task index, so output never depends on scheduling
- Progress and failure tracking per job (the most recent finished jobs are kept)
"""

import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from carbm.core.errors import GridExecutionError

logger = logging.getLogger(__name__)

T = TypeVar("T")

MAX_TRACKED_JOBS = 32


@dataclass
class GridJob:
    """Represents one grid evaluation."""
    job_id: str
    label: str
    status: str = "pending"  # pending, running, completed, failed
    total: int = 0
    completed: int = 0
    failed: int = 0
    errors: List[str] = field(default_factory=list)
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None

    @property
    def progress(self) -> float:
        if self.total == 0:
            return 0.0
        return (self.completed + self.failed) / self.total


class GridRunner:
    """
    Runs independent tasks concurrently and returns results in task order.

    Usage:
        runner = GridRunner(max_workers=4)
        columns = runner.run(tasks, label="lee-yang")
    """

    def __init__(self, max_workers: Optional[int] = None, max_jobs: int = MAX_TRACKED_JOBS):
        self.max_workers = max_workers
        self.max_jobs = max(1, max_jobs)
        self._jobs: Dict[str, GridJob] = {}
        self._lock = threading.Lock()

    def run(self, tasks: Sequence[Callable[[], T]], label: str = "grid") -> List[T]:
        """
        Execute ``tasks`` and return their results by index.

        Raises:
            GridExecutionError: one or more tasks failed (raised after all finish)
        """
        job = GridJob(
            job_id=f"grid_{uuid.uuid4().hex[:12]}",
            label=label,
            total=len(tasks),
            started_at=datetime.now(),
        )
        with self._lock:
            self._jobs[job.job_id] = job
        job.status = "running"
        logger.info(f"[Grid {job.job_id}] Starting {label}: {job.total} tasks")

        results: List[Any] = [None] * len(tasks)
        started = time.perf_counter()

        if self.max_workers == 1 or len(tasks) <= 1:
            for idx, task in enumerate(tasks):
                self._run_one(job, idx, task, results)
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                futures = [
                    pool.submit(self._run_one, job, idx, task, results)
                    for idx, task in enumerate(tasks)
                ]
                for future in as_completed(futures):
                    future.result()

        job.status = "completed" if job.failed == 0 else "failed"
        job.completed_at = datetime.now()
        self._prune_jobs()
        logger.info(
            f"[Grid {job.job_id}] Complete: {job.completed}/{job.total} succeeded, "
            f"{job.failed} failed in {time.perf_counter() - started:.2f}s"
        )

        if job.failed:
            raise GridExecutionError(
                f"{job.failed} of {job.total} grid tasks failed",
                details={"job_id": job.job_id, "errors": job.errors[:10]},
            )
        return results

    def _run_one(self, job: GridJob, idx: int, task: Callable[[], Any], results: List[Any]) -> None:
        try:
            results[idx] = task()
            with self._lock:
                job.completed += 1
        except Exception as e:
            logger.error(f"[Grid {job.job_id}] Task {idx} failed: {e}")
            with self._lock:
                job.failed += 1
                job.errors.append(f"task {idx}: {e}")

    def _prune_jobs(self) -> None:
        """Drop the oldest finished jobs beyond ``max_jobs``; running jobs stay."""
        with self._lock:
            finished = [jid for jid, j in self._jobs.items() if j.status in ("completed", "failed")]
            excess = len(self._jobs) - self.max_jobs
            for jid in finished[:max(0, excess)]:
                del self._jobs[jid]

    def get_job_status(self, job_id: str) -> Optional[Dict[str, Any]]:
        job = self._jobs.get(job_id)
        if job is None:
            return None
        return {
            "job_id": job.job_id,
            "label": job.label,
            "status": job.status,
            "total": job.total,
            "completed": job.completed,
            "failed": job.failed,
            "progress": job.progress,
            "errors": job.errors[:10],
            "started_at": job.started_at.isoformat() if job.started_at else None,
            "completed_at": job.completed_at.isoformat() if job.completed_at else None,
        }

    def list_jobs(self, limit: int = 20) -> List[Dict[str, Any]]:
        """List recent grid jobs."""
        jobs = sorted(self._jobs.values(), key=lambda j: j.started_at or datetime.min, reverse=True)
        return [self.get_job_status(j.job_id) for j in jobs[:limit]]


# Global instance
_grid_runner: Optional[GridRunner] = None


def get_grid_runner(max_workers: Optional[int] = None) -> GridRunner:
    """Get or create the global grid runner; a different worker count replaces it."""
    global _grid_runner

    if max_workers is None:
        from carbm.core.config import get_settings
        max_workers = get_settings().runner.threads or None

    if _grid_runner is None or _grid_runner.max_workers != max_workers:
        _grid_runner = GridRunner(max_workers=max_workers)

    return _grid_runner
