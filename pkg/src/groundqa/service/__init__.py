"""Deployable surface: the pipeline, the job model and the HTTP API."""

from .jobs import Job, JobManager, JobState, JobStore
from .pipeline import ConversationStore, Pipeline, PipelineError, PipelineResponse, Stage, StageError, StageRecord

__all__ = [
    "ConversationStore", "Job", "JobManager", "JobState", "JobStore", "Pipeline", "PipelineError",
    "PipelineResponse", "Stage", "StageError", "StageRecord",
]
