"""Fact database: KB triples, entity-tagged sentences, and cloze queries.

A database is immutable once built. Fact sets are always ordered by
ascending fact_id so that every downstream consumer (model, explainers,
evaluation) indexes facts identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DanglingReferenceError,
    EntityCountMismatchError,
    ParseError,
)

SUBJ_SLOT = "⟨SUBJ⟩"  # ⟨SUBJ⟩
OBJ_SLOT = "⟨OBJ⟩"  # ⟨OBJ⟩
BLANK = "_blank_"

FAKE_PREFIX = "fake:"


@dataclass(frozen=True)
class Entity:
    id: str
    surface: str

    def __post_init__(self):
        if not self.surface:
            raise ValueError(f"entity {self.id!r} has an empty surface")


@dataclass(frozen=True)
class Relation:
    id: str


@dataclass(frozen=True)
class Fact:
    """One KB triple or one entity-tagged sentence.

    KB facts carry a relation and no tokens. Text facts carry a token list
    with exactly one subject slot and one object slot; the stored subject
    is inlined into the subject slot at encoding/rendering time.
    """

    fact_id: str
    kind: str  # "kb" | "text"
    subject: str
    object: str
    relation: str | None = None
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind == "kb":
            if self.relation is None or self.tokens is not None:
                raise ValueError(f"KB fact {self.fact_id!r} needs a relation and no tokens")
        elif self.kind == "text":
            if self.relation is not None or self.tokens is None:
                raise ValueError(f"text fact {self.fact_id!r} needs tokens and no relation")
            if self.tokens.count(SUBJ_SLOT) != 1 or self.tokens.count(OBJ_SLOT) != 1:
                raise ValueError(
                    f"text fact {self.fact_id!r} must contain exactly one {SUBJ_SLOT} "
                    f"and one {OBJ_SLOT}"
                )
            if self.subject in (SUBJ_SLOT, OBJ_SLOT):
                raise ValueError(f"text fact {self.fact_id!r}: subject may not be a slot marker")
        else:
            raise ValueError(f"fact {self.fact_id!r}: unknown kind {self.kind!r}")

    @property
    def is_fake(self) -> bool:
        return self.fact_id.startswith(FAKE_PREFIX)


@dataclass(frozen=True)
class Query:
    """A cloze sentence with exactly one blank and at least one entity token."""

    query_id: str
    tokens: tuple[str, ...]
    answer: str

    def __post_init__(self):
        if self.tokens.count(BLANK) != 1:
            raise ValueError(f"query {self.query_id!r} must contain exactly one {BLANK}")


class FactDatabase:
    """Immutable store of entities, relations, KB facts, text facts, queries."""

    def __init__(
        self,
        entities: Iterable[Entity],
        relations: Iterable[Relation],
        kb_facts: Iterable[Fact],
        text_facts: Iterable[Fact],
        queries: Iterable[Query],
    ):
        self.entities: dict[str, Entity] = {}
        for e in entities:
            if e.id in self.entities:
                raise ValueError(f"duplicate entity id {e.id!r}")
            self.entities[e.id] = e
        self.relations: dict[str, Relation] = {}
        for r in relations:
            if r.id in self.relations:
                raise ValueError(f"duplicate relation id {r.id!r}")
            self.relations[r.id] = r
        self.kb_facts: dict[str, Fact] = {}
        self.text_facts: dict[str, Fact] = {}
        for f in kb_facts:
            if f.kind != "kb":
                raise ValueError(f"{f.fact_id!r} is not a KB fact")
            self._add_fact(self.kb_facts, f)
        for f in text_facts:
            if f.kind != "text":
                raise ValueError(f"{f.fact_id!r} is not a text fact")
            self._add_fact(self.text_facts, f)
        self.queries: dict[str, Query] = {}
        for q in queries:
            if q.query_id in self.queries:
                raise ValueError(f"duplicate query id {q.query_id!r}")
            self.queries[q.query_id] = q
        self._validate_references()
        # subject -> sorted fact ids, precomputed for retrieval
        self._by_subject: dict[str, list[str]] = {}
        for fid in sorted(self.fact_ids()):
            self._by_subject.setdefault(self.fact(fid).subject, []).append(fid)

    def _add_fact(self, table: dict[str, Fact], f: Fact) -> None:
        if f.fact_id in self.kb_facts or f.fact_id in self.text_facts:
            raise ValueError(f"duplicate fact id {f.fact_id!r}")
        table[f.fact_id] = f

    def _validate_references(self) -> None:
        for f in list(self.kb_facts.values()) + list(self.text_facts.values()):
            for eid in (f.subject, f.object):
                if eid not in self.entities:
                    raise DanglingReferenceError(
                        f"fact {f.fact_id!r} references unknown entity {eid!r}"
                    )
            if f.kind == "kb" and f.relation not in self.relations:
                raise DanglingReferenceError(
                    f"fact {f.fact_id!r} references unknown relation {f.relation!r}"
                )
        for q in self.queries.values():
            if q.answer not in self.entities:
                raise DanglingReferenceError(
                    f"query {q.query_id!r} references unknown entity {q.answer!r}"
                )
            if not self.query_entities(q):
                raise DanglingReferenceError(
                    f"query {q.query_id!r} contains no known entity token"
                )

    # -- lookups ---------------------------------------------------------

    def fact(self, fact_id: str) -> Fact:
        f = self.kb_facts.get(fact_id) or self.text_facts.get(fact_id)
        if f is None:
            raise DanglingReferenceError(f"unknown fact id {fact_id!r}")
        return f

    def fact_ids(self) -> Iterator[str]:
        yield from self.kb_facts
        yield from self.text_facts

    def query_entities(self, q: Query) -> tuple[str, ...]:
        """Distinct entity ids in a query, in order of first occurrence."""
        seen: list[str] = []
        for tok in q.tokens:
            if tok in self.entities and tok not in seen:
                seen.append(tok)
        return tuple(seen)

    def extend(self, extra_facts: Iterable[Fact]) -> "FactDatabase":
        """New database sharing entities/relations/queries, plus extra facts."""
        extra = list(extra_facts)
        return FactDatabase(
            self.entities.values(),
            self.relations.values(),
            list(self.kb_facts.values()) + [f for f in extra if f.kind == "kb"],
            list(self.text_facts.values()) + [f for f in extra if f.kind == "text"],
            self.queries.values(),
        )

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.entities), len(self.kb_facts), len(self.text_facts))


class FactSet:
    """Ordered, duplicate-free set of fact ids (ascending fact_id)."""

    __slots__ = ("ids",)

    def __init__(self, ids: Iterable[str], db: FactDatabase | None = None):
        ordered = tuple(sorted(set(ids)))
        if db is not None:
            for fid in ordered:
                db.fact(fid)  # raises DanglingReferenceError
        self.ids = ordered

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[str]:
        return iter(self.ids)

    def __contains__(self, fact_id: str) -> bool:
        return fact_id in self.ids

    def __eq__(self, other) -> bool:
        return isinstance(other, FactSet) and self.ids == other.ids

    def __hash__(self) -> int:
        return hash(self.ids)

    def __repr__(self) -> str:
        return f"FactSet({list(self.ids)!r})"

    def without(self, fact_id: str) -> "FactSet":
        return FactSet(fid for fid in self.ids if fid != fact_id)

    def union(self, other: "FactSet") -> "FactSet":
        return FactSet(self.ids + other.ids)

    def facts(self, db: FactDatabase) -> list[Fact]:
        return [db.fact(fid) for fid in self.ids]


# -- retrieval and fake-fact substitution --------------------------------


def retrieve_facts(q: Query, db: FactDatabase, text_cap: int = 500) -> FactSet:
    """All KB facts, and at most `text_cap` text facts, subject-linked to `q`.

    A fact qualifies when its subject is one of the query's entity tokens.
    Text facts beyond the cap are dropped in ascending fact_id order (the
    lowest ids are kept).
    """
    if text_cap < 0:
        raise ValueError("text_cap must be >= 0")
    entities = set(db.query_entities(q))
    kb_ids: list[str] = []
    text_ids: list[str] = []
    for eid in entities:
        for fid in db._by_subject.get(eid, ()):
            if fid in db.kb_facts:
                kb_ids.append(fid)
            else:
                text_ids.append(fid)
    text_ids = sorted(text_ids)[:text_cap]
    return FactSet(kb_ids + text_ids, db)


def substitute_subjects(
    donor: FactSet,
    donor_query: Query,
    target_query: Query,
    db: FactDatabase,
) -> tuple[FactSet, FactDatabase]:
    """Rebind donor facts' subjects onto the target query's entities.

    The mapping pairs donor-query entities with target-query entities
    positionally, by order of first occurrence in each token list. New
    facts keep relations, objects, and token sequences, and get fresh ids
    with a "fake:" prefix. Returns the fake set together with a database
    extension in which its ids resolve.
    """
    donor_entities = db.query_entities(donor_query)
    target_entities = db.query_entities(target_query)
    if len(donor_entities) != len(target_entities):
        raise EntityCountMismatchError(
            f"donor query {donor_query.query_id!r} has {len(donor_entities)} distinct "
            f"entities, target {target_query.query_id!r} has {len(target_entities)}"
        )
    mapping = dict(zip(donor_entities, target_entities))
    fakes: list[Fact] = []
    for f in donor.facts(db):
        if f.subject not in mapping:
            raise DanglingReferenceError(
                f"donor fact {f.fact_id!r} subject {f.subject!r} does not occur "
                f"in donor query {donor_query.query_id!r}"
            )
        fakes.append(
            Fact(
                fact_id=FAKE_PREFIX + f.fact_id,
                kind=f.kind,
                subject=mapping[f.subject],
                object=f.object,
                relation=f.relation,
                tokens=f.tokens,
            )
        )
    extended = db.extend(fakes)
    return FactSet((f.fact_id for f in fakes), extended), extended


# -- JSONL persistence ----------------------------------------------------


def _fact_to_obj(f: Fact) -> dict:
    if f.kind == "kb":
        return {
            "kind": "kb",
            "id": f.fact_id,
            "subject": f.subject,
            "relation": f.relation,
            "object": f.object,
        }
    return {
        "kind": "text",
        "id": f.fact_id,
        "subject": f.subject,
        "object": f.object,
        "tokens": list(f.tokens),
    }


def save_database(db: FactDatabase, path: str | Path) -> None:
    """Write one JSONL file with entities, relations, facts, and queries."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for eid in sorted(db.entities):
            e = db.entities[eid]
            fh.write(json.dumps({"kind": "entity", "id": e.id, "surface": e.surface},
                                ensure_ascii=False, sort_keys=True) + "\n")
        for rid in sorted(db.relations):
            fh.write(json.dumps({"kind": "relation", "id": rid},
                                ensure_ascii=False, sort_keys=True) + "\n")
        for fid in sorted(db.fact_ids()):
            fh.write(json.dumps(_fact_to_obj(db.fact(fid)),
                                ensure_ascii=False, sort_keys=True) + "\n")
        for qid in sorted(db.queries):
            q = db.queries[qid]
            fh.write(json.dumps({"id": q.query_id, "tokens": list(q.tokens),
                                 "answer": q.answer},
                                ensure_ascii=False, sort_keys=True) + "\n")


def load_database(path: str | Path) -> FactDatabase:
    """Parse a JSONL corpus file and return a fully resolved database.

    Raises ParseError with the offending line number, or
    DanglingReferenceError naming the unresolved id.
    """
    path = Path(path)
    entities: list[Entity] = []
    relations: list[Relation] = []
    kb_facts: list[Fact] = []
    text_facts: list[Fact] = []
    queries: list[Query] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            try:
                kind = obj.get("kind")
                if kind == "entity":
                    entities.append(Entity(id=obj["id"], surface=obj["surface"]))
                elif kind == "relation":
                    relations.append(Relation(id=obj["id"]))
                elif kind == "kb":
                    kb_facts.append(Fact(
                        fact_id=obj["id"], kind="kb", subject=obj["subject"],
                        object=obj["object"], relation=obj["relation"],
                    ))
                elif kind == "text":
                    text_facts.append(Fact(
                        fact_id=obj["id"], kind="text", subject=obj["subject"],
                        object=obj["object"], tokens=tuple(obj["tokens"]),
                    ))
                elif kind is None and "tokens" in obj and "answer" in obj:
                    queries.append(Query(
                        query_id=obj["id"], tokens=tuple(obj["tokens"]),
                        answer=obj["answer"],
                    ))
                else:
                    raise ParseError(path, line_no, f"unrecognized record kind {kind!r}")
            except (KeyError, ValueError, TypeError) as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(path, line_no, str(exc)) from exc
    return FactDatabase(entities, relations, kb_facts, text_facts, queries)


def save_provenance(planted: Mapping[str, str], path: str | Path) -> None:
    """Write the query -> planted-fact side table as JSONL."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for qid in sorted(planted):
            fh.write(json.dumps({"query_id": qid, "planted_fact_id": planted[qid]},
                                ensure_ascii=False, sort_keys=True) + "\n")


def load_provenance(path: str | Path) -> dict[str, str]:
    planted: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                planted[obj["query_id"]] = obj["planted_fact_id"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(path, line_no, str(exc)) from exc
    return planted
