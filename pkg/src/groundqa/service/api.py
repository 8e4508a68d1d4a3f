"""HTTP API.

POST /v1/answer      run the pipeline synchronously
POST /v1/jobs        enqueue a request; 202 with the job id, 429 + Retry-After when full
GET  /v1/jobs/{id}   job state; 404 unknown id, 410 past retention
GET  /v1/health      liveness plus corpus and queue figures
"""

from __future__ import annotations

from contextlib import asynccontextmanager
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..errors import QueueFull, RetentionExpired, UnknownJobId
from ..retrieval import corpus_summary
from .jobs import JobManager, JobStore, Runner
from .pipeline import Pipeline


class AnswerOptions(BaseModel):
    locale: Optional[str] = Field(None, description="en or ar; detected from the query when absent")
    latitude: Optional[float] = Field(None, ge=-90, le=90)
    longitude: Optional[float] = Field(None, ge=-180, le=180)
    utc_offset: Optional[float] = Field(None, ge=-14, le=14)
    city: Optional[str] = None
    date: Optional[str] = Field(None, description="reference date, YYYY-MM-DD")
    method: Optional[str] = Field(None, description="prayer-time method preset")

    def to_options(self) -> dict[str, Any]:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class AnswerRequest(BaseModel):
    query: str = Field(..., min_length=1, max_length=8000)
    conversation_id: Optional[str] = Field(None, max_length=200)
    options: AnswerOptions = Field(default_factory=AnswerOptions)


def pipeline_runner(pipeline: Pipeline, store: JobStore | None = None) -> Runner:
    """Adapt the pipeline to the job runner contract; stage errors fail the job."""

    def run(query: str, options: dict[str, Any]) -> tuple[dict | None, dict | None]:
        options = dict(options)
        conversation_id = options.pop("conversation_id", None)
        response = pipeline.answer(query, conversation_id, options)
        body = response.to_dict()
        if store is not None:
            store.save_trace(response.trace_id, {"stages": body["stages"], "agent_trace": body["agent_trace"]})
        if response.error is not None:
            return None, response.error.to_dict()
        return body, None

    return run


def create_app(pipeline: Pipeline, jobs: JobManager | None = None, *, start_workers: bool = True) -> FastAPI:
    if jobs is None:
        settings = pipeline.services.settings
        store = JobStore(settings.job_store, settings.job_retention_seconds)
        jobs = JobManager(store, pipeline_runner(pipeline, store), settings.job_workers, settings.job_queue_size)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if start_workers:
            jobs.start()
        try:
            yield
        finally:
            jobs.stop()

    app = FastAPI(title="groundqa", version="0.1.0", lifespan=lifespan)
    app.state.pipeline = pipeline
    app.state.jobs = jobs

    @app.post("/v1/answer")
    def answer(request: AnswerRequest):
        if not request.query.strip():
            raise HTTPException(422, "query is empty")
        response = pipeline.answer(request.query, request.conversation_id, request.options.to_options())
        body = response.to_dict()
        if response.error is not None:
            return JSONResponse(status_code=500, content=body)
        return body

    @app.post("/v1/jobs", status_code=202)
    def submit(request: AnswerRequest):
        if not request.query.strip():
            raise HTTPException(422, "query is empty")
        options = request.options.to_options()
        if request.conversation_id:
            options["conversation_id"] = request.conversation_id
        try:
            job = jobs.submit(request.query, options)
        except QueueFull as exc:
            return JSONResponse(
                status_code=429,
                content={"detail": str(exc), "retry_after": exc.retry_after},
                headers={"Retry-After": str(int(exc.retry_after))},
            )
        return {"id": job.id, "state": job.state.value, "submitted_at": job.submitted_at}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return jobs.get(job_id).to_dict()
        except UnknownJobId:
            raise HTTPException(404, f"unknown job id {job_id!r}") from None
        except RetentionExpired as exc:
            raise HTTPException(410, str(exc)) from None

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "corpora": corpus_summary(pipeline.services.index.docs),
            "jobs": jobs.store.counts(),
            "queue_depth": jobs.depth,
            "workers": jobs.workers,
        }

    return app
