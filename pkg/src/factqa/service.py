"""HTTP service for the annotation study.

Serves open tasks (hidden side assignment stripped), records votes to an
append-only JSONL log, and reports the live aggregate. Vote writes are
serialized through one lock; reads work on immutable task data.
"""

from __future__ import annotations

import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .seeds import subseed
from .study import (
    CHOICES,
    StudyTask,
    Vote,
    append_vote,
    build_report,
    load_tasks,
    load_votes,
)


class VoteBody(BaseModel):
    task_id: str
    annotator: str
    choice: Literal["definitely-left", "rather-left", "difficult",
                    "rather-right", "definitely-right"]


class StudyStore:
    """Tasks plus an append-only vote log with an in-memory (task, annotator)
    index for duplicate rejection."""

    def __init__(self, tasks: list[StudyTask], votes_path: str | Path,
                 seed: int = 0):
        self.tasks = {t.task_id: t for t in tasks}
        self.task_order = [t.task_id for t in tasks]
        self.votes_path = Path(votes_path)
        self.seed = seed
        self._lock = threading.Lock()
        self._votes: list[Vote] = load_votes(self.votes_path)
        self._voted: set[tuple[str, str]] = {(v.task_id, v.annotator)
                                             for v in self._votes}

    def next_task(self, annotator: str) -> StudyTask | None:
        """First task this annotator has not voted on, in a seed-pinned
        per-annotator shuffle (never the generation order)."""
        rng = np.random.default_rng(subseed(self.seed, f"serve:{annotator}"))
        order = [self.task_order[i] for i in rng.permutation(len(self.task_order))]
        with self._lock:
            voted = set(self._voted)
        for task_id in order:
            if (task_id, annotator) not in voted:
                return self.tasks[task_id]
        return None

    def record_vote(self, task_id: str, annotator: str, choice: str) -> Vote:
        if task_id not in self.tasks:
            raise KeyError(task_id)
        if choice not in CHOICES:
            raise ValueError(choice)
        vote = Vote(task_id=task_id, annotator=annotator, choice=choice,
                    timestamp=datetime.now(timezone.utc).isoformat())
        with self._lock:
            if (task_id, annotator) in self._voted:
                raise FileExistsError(task_id)
            append_vote(vote, self.votes_path)
            self._votes.append(vote)
            self._voted.add((task_id, annotator))
        return vote

    def report(self):
        with self._lock:
            votes = list(self._votes)
        return build_report(list(self.tasks.values()), votes)


def create_app(tasks_path: str | Path, votes_path: str | Path, seed: int = 0,
               static_dir: str | Path | None = None) -> FastAPI:
    store = StudyStore(load_tasks(tasks_path), votes_path, seed)
    app = FastAPI(title="annotation study service")
    app.state.store = store

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/tasks/next")
    def tasks_next(annotator: str):
        task = store.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        return task.public_view()

    @app.post("/api/votes", status_code=201)
    def votes(body: VoteBody):
        try:
            store.record_vote(body.task_id, body.annotator, body.choice)
        except KeyError:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown task {body.task_id}"})
        except FileExistsError:
            return JSONResponse(
                status_code=409,
                content={"error": f"{body.annotator} already voted on {body.task_id}"})
        return {"status": "recorded"}

    @app.get("/api/report")
    def report():
        return store.report().to_obj()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="static")
    return app


def serve(tasks_path: str | Path, votes_path: str | Path, port: int,
          host: str = "127.0.0.1", seed: int = 0,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(tasks_path, votes_path, seed, static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
