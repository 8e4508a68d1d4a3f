"""Asynchronous jobs: a SQLite store (WAL journal) plus a bounded worker pool.

States only move forward along queued -> processing -> completed | failed.
Every transition is a single conditional UPDATE, so concurrent pollers can
never observe a state earlier than one they already saw.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import sqlite3
import threading
import time
import uuid
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from enum import Enum
from typing import Any

from ..errors import QueueFull, RetentionExpired, UnknownJobId

log = logging.getLogger(__name__)


class JobState(str, Enum):
    QUEUED = "queued"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"

    @property
    def rank(self) -> int:
        return _RANK[self]

    @property
    def terminal(self) -> bool:
        return self in (JobState.COMPLETED, JobState.FAILED)


_RANK = {JobState.QUEUED: 0, JobState.PROCESSING: 1, JobState.COMPLETED: 2, JobState.FAILED: 2}
_ALLOWED = {
    JobState.PROCESSING: (JobState.QUEUED,),
    JobState.COMPLETED: (JobState.PROCESSING,),
    JobState.FAILED: (JobState.PROCESSING,),
}


@dataclass(frozen=True)
class Job:
    id: str
    state: JobState
    submitted_at: float
    updated_at: float
    query: str
    options: dict[str, Any]
    result: dict[str, Any] | None = None
    error: dict[str, Any] | None = None

    def __post_init__(self):
        if (self.result is not None) != (self.state is JobState.COMPLETED):
            raise ValueError("result must be present exactly when the job is completed")
        if (self.error is not None) != (self.state is JobState.FAILED):
            raise ValueError("error must be present exactly when the job failed")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "state": self.state.value,
            "submitted_at": self.submitted_at,
            "updated_at": self.updated_at,
            "result": self.result,
            "error": self.error,
        }


_SCHEMA = """
CREATE TABLE IF NOT EXISTS jobs (
    id TEXT PRIMARY KEY,
    state TEXT NOT NULL,
    submitted_at REAL NOT NULL,
    updated_at REAL NOT NULL,
    query TEXT NOT NULL,
    options TEXT NOT NULL,
    result TEXT,
    error TEXT,
    expired INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS traces (
    id TEXT PRIMARY KEY,
    job_id TEXT,
    created_at REAL NOT NULL,
    payload TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS jobs_state ON jobs(state);
"""


class JobStore:
    """Single-file job and trace store. ``path=":memory:"`` keeps it in memory."""

    def __init__(self, path: str = ":memory:", retention_seconds: float = 24 * 3600.0, clock: Callable[[], float] = time.time):
        self.path = path
        self.retention_seconds = retention_seconds
        self.clock = clock
        self._lock = threading.Lock()
        self._db = sqlite3.connect(path, check_same_thread=False, isolation_level=None)
        if path != ":memory:":
            self._db.execute("PRAGMA journal_mode=WAL")
            self._db.execute("PRAGMA synchronous=NORMAL")
        self._db.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._db.close()

    def create(self, query: str, options: Mapping[str, Any] | None = None) -> Job:
        now = self.clock()
        job_id = uuid.uuid4().hex
        with self._lock:
            self._db.execute(
                "INSERT INTO jobs (id, state, submitted_at, updated_at, query, options) VALUES (?, ?, ?, ?, ?, ?)",
                (job_id, JobState.QUEUED.value, now, now, query, json.dumps(dict(options or {}), default=str)),
            )
        return Job(job_id, JobState.QUEUED, now, now, query, dict(options or {}))

    def transition(
        self, job_id: str, state: JobState, *, result: Mapping[str, Any] | None = None, error: Mapping[str, Any] | None = None
    ) -> bool:
        """Move a job forward; returns False (and changes nothing) if the move is not allowed from its current state."""
        sources = _ALLOWED[state]
        marks = ",".join("?" * len(sources))
        with self._lock:
            cur = self._db.execute(
                f"UPDATE jobs SET state = ?, updated_at = ?, result = ?, error = ? WHERE id = ? AND state IN ({marks})",
                (
                    state.value,
                    self.clock(),
                    json.dumps(result, ensure_ascii=False, default=str) if result is not None else None,
                    json.dumps(error, ensure_ascii=False, default=str) if error is not None else None,
                    job_id,
                    *(s.value for s in sources),
                ),
            )
            return cur.rowcount == 1

    def get(self, job_id: str) -> Job:
        """Current job state; side-effect free."""
        with self._lock:
            row = self._db.execute(
                "SELECT id, state, submitted_at, updated_at, query, options, result, error, expired FROM jobs WHERE id = ?",
                (job_id,),
            ).fetchone()
        if row is None:
            raise UnknownJobId(job_id)
        state = JobState(row[1])
        if row[8] or (state.terminal and self.clock() - row[3] > self.retention_seconds):
            raise RetentionExpired(f"job {job_id} finished more than {self.retention_seconds:g} s ago")
        return Job(
            row[0], state, row[2], row[3], row[4], json.loads(row[5]),
            json.loads(row[6]) if row[6] is not None else None,
            json.loads(row[7]) if row[7] is not None else None,
        )

    def ids_in_state(self, state: JobState) -> list[str]:
        with self._lock:
            return [r[0] for r in self._db.execute("SELECT id FROM jobs WHERE state = ? ORDER BY submitted_at", (state.value,))]

    def purge_expired(self) -> int:
        """Drop results of jobs past retention; the id is kept so later reads report expiry."""
        cutoff = self.clock() - self.retention_seconds
        with self._lock:
            cur = self._db.execute(
                "UPDATE jobs SET result = NULL, error = NULL, expired = 1 WHERE expired = 0 AND state IN (?, ?) AND updated_at < ?",
                (JobState.COMPLETED.value, JobState.FAILED.value, cutoff),
            )
            self._db.execute("DELETE FROM traces WHERE created_at < ?", (cutoff,))
            return cur.rowcount

    def save_trace(self, trace_id: str, payload: Mapping[str, Any], job_id: str | None = None) -> None:
        with self._lock:
            self._db.execute(
                "INSERT OR REPLACE INTO traces (id, job_id, created_at, payload) VALUES (?, ?, ?, ?)",
                (trace_id, job_id, self.clock(), json.dumps(payload, ensure_ascii=False, default=str)),
            )

    def get_trace(self, trace_id: str) -> dict[str, Any] | None:
        with self._lock:
            row = self._db.execute("SELECT payload FROM traces WHERE id = ?", (trace_id,)).fetchone()
        return json.loads(row[0]) if row else None

    def counts(self) -> dict[str, int]:
        with self._lock:
            rows = self._db.execute("SELECT state, COUNT(*) FROM jobs WHERE expired = 0 GROUP BY state").fetchall()
        return {state.value: 0 for state in JobState} | {s: n for s, n in rows}


# A runner takes (query, options) and returns (result payload or None, error payload or None).
Runner = Callable[[str, dict[str, Any]], tuple[dict[str, Any] | None, dict[str, Any] | None]]


class JobManager:
    """Bounded multi-producer queue drained by a fixed worker pool.

    Each job id is put on the queue once and taken by exactly one worker.
    When the queue is full, :meth:`submit` raises QueueFull with a
    retry-after estimate and no job row is created.
    """

    def __init__(self, store: JobStore, runner: Runner, workers: int = 4, queue_size: int = 256, purge_interval: float = 300.0):
        if workers < 1 or queue_size < 1:
            raise ValueError("workers and queue_size must be positive")
        self.store = store
        self.runner = runner
        self.workers = workers
        self._queue: queue.Queue[str | None] = queue.Queue(maxsize=queue_size)
        self._threads: list[threading.Thread] = []
        self._submit_lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self._mean_seconds = 1.0
        self._started = False
        self.purge_interval = purge_interval
        self._stop = threading.Event()

    # lifecycle -------------------------------------------------------------

    def start(self) -> "JobManager":
        if self._started:
            return self
        self._started = True
        self._stop.clear()
        for stale in self.store.ids_in_state(JobState.PROCESSING):
            self.store.transition(stale, JobState.FAILED, error={"stage": "worker", "type": "Interrupted", "message": "service restarted while the job was running"})
        for pending in self.store.ids_in_state(JobState.QUEUED):
            try:
                self._queue.put_nowait(pending)
            except queue.Full:
                self.store.transition(pending, JobState.PROCESSING)
                self.store.transition(pending, JobState.FAILED, error={"stage": "queue", "type": "QueueFull", "message": "queue full on restart"})
        for i in range(self.workers):
            thread = threading.Thread(target=self._work, name=f"groundqa-job-{i}", daemon=True)
            thread.start()
            self._threads.append(thread)
        if self.purge_interval > 0:
            threading.Thread(target=self._purge_loop, name="groundqa-job-purge", daemon=True).start()
        return self

    def stop(self, timeout: float = 10.0) -> None:
        if not self._started:
            return
        self._stop.set()
        for _ in self._threads:
            self._queue.put(None)
        for thread in self._threads:
            thread.join(timeout)
        self._threads.clear()
        self._started = False

    def __enter__(self) -> "JobManager":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # api -------------------------------------------------------------------

    @property
    def depth(self) -> int:
        return self._queue.qsize()

    def retry_after(self) -> int:
        with self._stats_lock:
            mean = self._mean_seconds
        return max(1, math.ceil(mean * max(1, self._queue.qsize()) / self.workers))

    def submit(self, query: str, options: Mapping[str, Any] | None = None) -> Job:
        with self._submit_lock:
            if self._queue.full():
                raise QueueFull(self.retry_after())
            job = self.store.create(query, options)
            self._queue.put_nowait(job.id)
        return job

    def get(self, job_id: str) -> Job:
        return self.store.get(job_id)

    # workers ---------------------------------------------------------------

    def _work(self) -> None:
        while True:
            job_id = self._queue.get()
            try:
                if job_id is None:
                    return
                self._process(job_id)
            finally:
                self._queue.task_done()

    def _process(self, job_id: str) -> None:
        if not self.store.transition(job_id, JobState.PROCESSING):
            return
        started = time.perf_counter()
        try:
            job = self.store.get(job_id)
            result, error = self.runner(job.query, job.options)
        except Exception as exc:  # noqa: BLE001 - a job failure never kills the worker
            log.exception("job %s crashed", job_id)
            result, error = None, {"stage": "worker", "type": type(exc).__name__, "message": str(exc)}
        if error is not None:
            self.store.transition(job_id, JobState.FAILED, error=error)
        else:
            self.store.transition(job_id, JobState.COMPLETED, result=result or {})
        elapsed = time.perf_counter() - started
        with self._stats_lock:
            self._mean_seconds = 0.8 * self._mean_seconds + 0.2 * elapsed

    def _purge_loop(self) -> None:
        while not self._stop.wait(self.purge_interval):
            try:
                self.store.purge_expired()
            except sqlite3.Error as exc:
                log.warning("purge failed: %s", exc)

    def join(self, timeout: float | None = None) -> bool:
        """Wait until the queue drains; returns False on timeout."""
        deadline = None if timeout is None else time.monotonic() + timeout
        while self._queue.unfinished_tasks:
            if deadline is not None and time.monotonic() > deadline:
                return False
            time.sleep(0.01)
        return True
