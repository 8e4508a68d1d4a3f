"""Access to the packaged data files and user overrides."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

DATA_DIR = Path(str(resources.files("groundqa") / "data"))


def data_path(name: str) -> Path:
    return DATA_DIR / name


def checksum(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_json(path: str | os.PathLike, *, log_checksum: bool = False) -> Any:
    path = Path(path)
    if not path.is_absolute() and not path.exists():
        path = data_path(str(path))
    if log_checksum:
        log.info("loaded %s sha256=%s", path.name, checksum(path))
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_jsonl(path: str | os.PathLike) -> list[dict]:
    path = Path(path)
    if not path.is_absolute() and not path.exists():
        path = data_path(str(path))
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return records


@dataclass
class Settings:
    """Service configuration; every path defaults to a packaged data file.

    Loaded from a JSON file via :meth:`from_file`; environment variables
    ``GROUNDQA_MODEL_URL``, ``GROUNDQA_MODEL_NAME``, ``GROUNDQA_EMBEDDER_URL``,
    ``GROUNDQA_MODERATION_URL`` and ``GROUNDQA_API_KEY`` override the client
    endpoints.
    """

    router_rules: str = "router_rules.json"
    jurisprudence: str = "jurisprudence.json"
    almanac: str = "almanac.json"
    events: str = "events.jsonl"
    blocklist: str = "blocklist.txt"
    templates: str = "templates.json"
    adversarial_exemplars: str = "adversarial_exemplars.txt"
    corpora: dict[str, str] = field(
        default_factory=lambda: {
            "quran": "corpora/quran.jsonl",
            "hadith": "corpora/hadith.jsonl",
            "supplication": "corpora/supplication.jsonl",
            "fiqh": "corpora/fiqh.jsonl",
            "general": "corpora/general.jsonl",
        }
    )
    moderation_thresholds: tuple[float, float] = (3.0, 3.0)
    input_screen_threshold: float = 3.0
    quran_threshold: float = 0.8
    hadith_verified_threshold: float = 0.85
    rrf_k: float = 60.0
    max_iterations: int = 5
    embedding_dimension: int = 64
    model_url: str | None = None
    model_name: str = "default"
    embedder_url: str | None = None
    moderation_url: str | None = None
    api_key: str | None = None
    job_store: str = "groundqa_jobs.sqlite3"
    job_workers: int = 4
    job_queue_size: int = 256
    job_retention_seconds: float = 24 * 3600.0
    locale: str = "en"

    @classmethod
    def from_file(cls, path: str | os.PathLike | None = None, env: dict[str, str] | None = None) -> "Settings":
        values: dict[str, Any] = {}
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                values = json.load(fh)
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown settings: {', '.join(sorted(unknown))}")
        if "moderation_thresholds" in values:
            values["moderation_thresholds"] = tuple(values["moderation_thresholds"])
        settings = cls(**values)
        settings.apply_env(os.environ if env is None else env)
        return settings

    def apply_env(self, env) -> None:
        for var, attr in (
            ("GROUNDQA_MODEL_URL", "model_url"),
            ("GROUNDQA_MODEL_NAME", "model_name"),
            ("GROUNDQA_EMBEDDER_URL", "embedder_url"),
            ("GROUNDQA_MODERATION_URL", "moderation_url"),
            ("GROUNDQA_API_KEY", "api_key"),
        ):
            if env.get(var):
                setattr(self, attr, env[var])
