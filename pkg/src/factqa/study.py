"""Human comparison study: paired top-5 explanation lists and 5-option votes.

Tasks pair two models of different quality on queries where both predict
the same answer. Votes arrive as left/right judgments; the hidden side
assignment resolves them to model A/B, and the aggregate score maps the
vote distribution onto [0, 1] (above 0.5 = the stronger model was
trusted more).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateVoteError,
    EmptyAgreementError,
    NoVotesError,
    UnknownTaskError,
)
from .explain import make_explainer, top_k
from .seeds import subseed
from .store import BLANK, OBJ_SLOT, SUBJ_SLOT, Fact, FactDatabase, Query, retrieve_facts

CHOICES = ("definitely-left", "rather-left", "difficult",
           "rather-right", "definitely-right")

# A-resolved vote categories and their weights
A_CHOICES = ("definitely-a", "rather-a", "difficult", "rather-b", "definitely-b")
A_WEIGHTS = {
    "definitely-a": Fraction(1),
    "rather-a": Fraction(3, 4),
    "difficult": Fraction(1, 2),
    "rather-b": Fraction(1, 4),
    "definitely-b": Fraction(0),
}

_MIRROR = {
    "definitely-left": "definitely-right",
    "rather-left": "rather-right",
    "difficult": "difficult",
    "rather-right": "rather-left",
    "definitely-right": "definitely-left",
}

_LEFT_TO_A = dict(zip(CHOICES, A_CHOICES))


def resolve_choice(choice: str, a_side: str) -> str:
    """Map a left/right vote onto model A/B via the hidden side assignment."""
    if choice not in CHOICES:
        raise ValueError(f"unknown choice {choice!r}")
    if a_side not in ("left", "right"):
        raise ValueError(f"unknown side {a_side!r}")
    if a_side == "right":
        choice = _MIRROR[choice]
    return _LEFT_TO_A[choice]


def render_fact(fact: Fact, db: FactDatabase) -> str:
    """Display string: KB triples as subject — relation — object, text facts
    as the sentence with the subject inlined and the object slot blanked."""
    if fact.kind == "kb":
        return (f"{db.entities[fact.subject].surface} — {fact.relation} — "
                f"{db.entities[fact.object].surface}")
    words = []
    for tok in fact.tokens:
        if tok == SUBJ_SLOT:
            words.append(db.entities[fact.subject].surface)
        elif tok == OBJ_SLOT:
            words.append(BLANK)
        elif tok in db.entities:
            words.append(db.entities[tok].surface)
        else:
            words.append(tok)
    return " ".join(words)


def render_query(q: Query, db: FactDatabase) -> str:
    return " ".join(db.entities[tok].surface if tok in db.entities else tok
                    for tok in q.tokens)


@dataclass
class StudyTask:
    task_id: str
    query_id: str
    query_text: str
    answer: str  # surface form of the shared prediction
    method: str
    left_facts: tuple[str, ...]
    right_facts: tuple[str, ...]
    left_fact_ids: tuple[str, ...]
    right_fact_ids: tuple[str, ...]
    a_side: str  # "left" | "right" (hidden from annotators)

    @property
    def identical_lists(self) -> bool:
        return self.left_fact_ids == self.right_fact_ids

    def to_obj(self) -> dict:
        return {
            "task_id": self.task_id, "query_id": self.query_id,
            "query_text": self.query_text, "answer": self.answer,
            "method": self.method,
            "left_facts": list(self.left_facts), "right_facts": list(self.right_facts),
            "left_fact_ids": list(self.left_fact_ids),
            "right_fact_ids": list(self.right_fact_ids),
            "a_side": self.a_side,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "StudyTask":
        return cls(
            task_id=obj["task_id"], query_id=obj["query_id"],
            query_text=obj["query_text"], answer=obj["answer"],
            method=obj["method"],
            left_facts=tuple(obj["left_facts"]), right_facts=tuple(obj["right_facts"]),
            left_fact_ids=tuple(obj["left_fact_ids"]),
            right_fact_ids=tuple(obj["right_fact_ids"]),
            a_side=obj["a_side"],
        )

    def public_view(self) -> dict:
        """What annotators may see: everything except the side assignment."""
        return {
            "task_id": self.task_id, "query_text": self.query_text,
            "answer": self.answer, "method": self.method,
            "left_facts": list(self.left_facts), "right_facts": list(self.right_facts),
        }


@dataclass(frozen=True)
class Vote:
    task_id: str
    annotator: str
    choice: str
    timestamp: str = ""

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"invalid choice {self.choice!r}; "
                             f"expected one of {CHOICES}")


def generate_tasks(model_a, model_b, db: FactDatabase, methods: list[str],
                   k: int = 5, seed: int = 0, text_cap: int = 500,
                   lime_samples: int = 1000) -> list[StudyTask]:
    """Tasks over the agreement set (both models predict the same answer,
    ground truth not required), one per (query, method), methods cycled
    round-robin so they are equally distributed. Side assignment is
    uniform at random per task."""
    if not methods:
        raise ValueError("methods must be non-empty")
    agreement: list[tuple[Query, object, str]] = []
    for qid in sorted(db.queries):
        q = db.queries[qid]
        facts = retrieve_facts(q, db, text_cap)
        if len(facts) == 0:
            continue
        pred_a = model_a.answer(q, facts).prediction
        pred_b = model_b.answer(q, facts).prediction
        if pred_a == pred_b:
            agreement.append((q, facts, pred_a))
    if not agreement:
        raise EmptyAgreementError("the two models agree on no query")

    sides_rng = np.random.default_rng(subseed(seed, "sides"))
    tasks: list[StudyTask] = []
    counter = 0
    for q, facts, shared in agreement:
        for method in methods:
            lists = {}
            for tag, model in (("a", model_a), ("b", model_b)):
                explainer = make_explainer(
                    method, lime_samples=lime_samples,
                    seed=subseed(seed, f"lime:{method}:{q.query_id}:{tag}"))
                rv = explainer(q, shared, facts, model)
                ids = tuple(top_k(rv, facts, k))
                lists[tag] = (ids, tuple(render_fact(db.fact(f), db) for f in ids))
            a_side = "left" if sides_rng.random() < 0.5 else "right"
            left, right = ("a", "b") if a_side == "left" else ("b", "a")
            tasks.append(StudyTask(
                task_id=f"task:{counter:04d}", query_id=q.query_id,
                query_text=render_query(q, db),
                answer=db.entities[shared].surface, method=method,
                left_facts=lists[left][1], right_facts=lists[right][1],
                left_fact_ids=lists[left][0], right_fact_ids=lists[right][0],
                a_side=a_side,
            ))
            counter += 1
    return tasks


# -- persistence -----------------------------------------------------------


def save_tasks(tasks: list[StudyTask], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_obj(), ensure_ascii=False, sort_keys=True) + "\n")


def load_tasks(path: str | Path) -> list[StudyTask]:
    tasks = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                tasks.append(StudyTask.from_obj(json.loads(line)))
    return tasks


def append_vote(vote: Vote, path: str | Path) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "task_id": vote.task_id, "annotator": vote.annotator,
            "choice": vote.choice, "timestamp": vote.timestamp,
        }, ensure_ascii=False, sort_keys=True) + "\n")


def load_votes(path: str | Path) -> list[Vote]:
    votes = []
    p = Path(path)
    if not p.exists():
        return votes
    with p.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                votes.append(Vote(task_id=obj["task_id"], annotator=obj["annotator"],
                                  choice=obj["choice"],
                                  timestamp=obj.get("timestamp", "")))
    return votes


# -- aggregation -----------------------------------------------------------


def aggregate_score_exact(distribution) -> Fraction:
    """Weighted mean of A-resolved votes as an exact fraction.

    `distribution` maps A-resolved categories to counts or percentages
    (any nonnegative weights with a positive sum).
    """
    total = Fraction(0)
    weighted = Fraction(0)
    for cat, count in distribution.items():
        if cat not in A_WEIGHTS:
            raise ValueError(f"unknown vote category {cat!r}")
        n = Fraction(count)
        if n < 0:
            raise ValueError(f"negative count for {cat!r}")
        total += n
        weighted += n * A_WEIGHTS[cat]
    if total == 0:
        raise NoVotesError("aggregate score over an empty vote distribution")
    return weighted / total


def aggregate_score(distribution) -> float:
    """Float view of aggregate_score_exact (weights 1, .75, .5, .25, 0)."""
    return float(aggregate_score_exact(distribution))


def mirror_distribution(distribution) -> dict:
    """Swap the A and B categories (what flipping every side would produce)."""
    order = dict(zip(A_CHOICES, reversed(A_CHOICES)))
    return {order[cat]: n for cat, n in distribution.items()}


@dataclass
class MethodReport:
    method: str
    task_count: int
    vote_count: int
    counts: dict  # A-resolved category -> count
    percentages: dict  # A-resolved category -> percent of votes
    aggregate: float | None
    identical_list_tasks: int

    def to_obj(self) -> dict:
        return {
            "method": self.method, "task_count": self.task_count,
            "vote_count": self.vote_count, "counts": self.counts,
            "percentages": self.percentages, "aggregate_score": self.aggregate,
            "identical_list_tasks": self.identical_list_tasks,
        }


@dataclass
class StudyReport:
    methods: dict  # method -> MethodReport
    total_votes: int

    def to_obj(self) -> dict:
        return {"methods": {m: r.to_obj() for m, r in sorted(self.methods.items())},
                "total_votes": self.total_votes}


def build_report(tasks: list[StudyTask], votes: list[Vote]) -> StudyReport:
    """Pure fold over the vote log; replaying it reproduces the report."""
    by_id = {t.task_id: t for t in tasks}
    methods = sorted({t.method for t in tasks})
    counts = {m: {cat: 0 for cat in A_CHOICES} for m in methods}
    vote_count = {m: 0 for m in methods}
    for v in votes:
        task = by_id.get(v.task_id)
        if task is None:
            raise UnknownTaskError(f"vote for unknown task {v.task_id!r}")
        counts[task.method][resolve_choice(v.choice, task.a_side)] += 1
        vote_count[task.method] += 1
    reports = {}
    for m in methods:
        n = vote_count[m]
        percentages = {cat: (100.0 * c / n if n else 0.0)
                       for cat, c in counts[m].items()}
        aggregate = aggregate_score(counts[m]) if n else None
        reports[m] = MethodReport(
            method=m,
            task_count=sum(1 for t in tasks if t.method == m),
            vote_count=n,
            counts=counts[m],
            percentages=percentages,
            aggregate=aggregate,
            identical_list_tasks=sum(1 for t in tasks
                                     if t.method == m and t.identical_lists),
        )
    return StudyReport(reports, sum(vote_count.values()))
