"""Synthetic corpus generation with planted ground-truth facts.

Desk-scale substitute for a real KB + web-text corpus: every query gets
exactly one planted supporting fact (subject occurs in the query, object
is the answer) plus distractor facts with other objects, and the planted
fact is recorded in a provenance side table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConfigError
from .store import BLANK, OBJ_SLOT, SUBJ_SLOT, Entity, Fact, FactDatabase, Query, Relation

_NAME_STEMS = (
    "Alder", "Briar", "Coval", "Dorim", "Ellet", "Fenwick", "Garnet", "Hollis",
    "Imber", "Juno", "Kestrel", "Lorn", "Marlot", "Nerys", "Orvin", "Peralt",
    "Quill", "Rosten", "Selden", "Tamsin",
)


@dataclass(frozen=True)
class SynthConfig:
    entities: int
    relations: int
    facts_per_entity: int
    queries_per_entity: int
    vocab_size: int
    text_fraction: float = 0.5

    def validate(self) -> None:
        for name in ("entities", "relations", "facts_per_entity",
                     "queries_per_entity", "vocab_size"):
            if getattr(self, name) < 1:
                raise InfeasibleConfigError(f"{name} must be >= 1")
        if self.facts_per_entity > self.relations:
            raise InfeasibleConfigError(
                f"facts_per_entity={self.facts_per_entity} needs at least that many "
                f"relations (got {self.relations}); facts of one entity use distinct relations"
            )
        if self.facts_per_entity > self.entities - 1:
            raise InfeasibleConfigError(
                f"facts_per_entity={self.facts_per_entity} needs at least "
                f"{self.facts_per_entity + 1} entities (got {self.entities}); "
                f"objects of one entity's facts are distinct and never the subject"
            )
        if self.vocab_size < self.relations + 2:
            raise InfeasibleConfigError(
                f"vocab_size={self.vocab_size} too small: {self.relations} cue words "
                f"plus at least 2 filler words are required"
            )
        if not 0.0 <= self.text_fraction <= 1.0:
            raise InfeasibleConfigError("text_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SynthCorpus:
    db: FactDatabase
    planted: dict[str, str]  # query_id -> planted fact_id


def generate_synthetic_corpus(cfg: SynthConfig, seed: int) -> SynthCorpus:
    """Deterministically generate a corpus for a given seed.

    Each entity gets `facts_per_entity` facts over distinct relations with
    distinct objects; each query names one entity plus the cue word of one
    of its relations, and its answer is that fact's object.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)

    entities = [
        Entity(id=f"e:{i:03d}", surface=f"{_NAME_STEMS[i % len(_NAME_STEMS)]}-{i:03d}")
        for i in range(cfg.entities)
    ]
    relations = [Relation(id=f"r:{i:02d}") for i in range(cfg.relations)]
    # the first `relations` words are relation cues, the rest are fillers
    words = [f"w{i:03d}" for i in range(cfg.vocab_size)]
    cue = {relations[i].id: words[i] for i in range(cfg.relations)}
    fillers = words[cfg.relations:]

    kb_facts: list[Fact] = []
    text_facts: list[Fact] = []
    queries: list[Query] = []
    planted: dict[str, str] = {}
    facts_of: dict[str, list[Fact]] = {}

    fact_counter = 0
    for ent in entities:
        rel_ids = [relations[i].id for i in rng.choice(cfg.relations,
                                                       size=cfg.facts_per_entity,
                                                       replace=False)]
        other = [e.id for e in entities if e.id != ent.id]
        obj_ids = [other[i] for i in rng.choice(len(other),
                                                size=cfg.facts_per_entity,
                                                replace=False)]
        facts_of[ent.id] = []
        for rel_id, obj_id in zip(rel_ids, obj_ids):
            as_text = rng.random() < cfg.text_fraction
            if as_text:
                # same shape as queries: subject first, cue right before the
                # object slot, one filler in between
                tokens = (
                    SUBJ_SLOT,
                    fillers[rng.integers(len(fillers))],
                    cue[rel_id],
                    OBJ_SLOT,
                )
                fact = Fact(fact_id=f"txt:{fact_counter:05d}", kind="text",
                            subject=ent.id, object=obj_id, tokens=tokens)
                text_facts.append(fact)
            else:
                fact = Fact(fact_id=f"kb:{fact_counter:05d}", kind="kb",
                            subject=ent.id, object=obj_id, relation=rel_id)
                kb_facts.append(fact)
            facts_of[ent.id].append(fact)
            fact_counter += 1

    query_counter = 0
    for ent in entities:
        for j in range(cfg.queries_per_entity):
            fact = facts_of[ent.id][j % cfg.facts_per_entity]
            rel_id = fact.relation if fact.kind == "kb" else _cue_relation(fact, cue)
            # subject first and cue right before the blank, mirroring the
            # text-fact shape; the filler word varies the surface form
            tokens = (
                ent.id,
                fillers[rng.integers(len(fillers))],
                cue[rel_id],
                BLANK,
            )
            q = Query(query_id=f"q:{query_counter:05d}", tokens=tokens, answer=fact.object)
            queries.append(q)
            planted[q.query_id] = fact.fact_id
            query_counter += 1

    db = FactDatabase(entities, relations, kb_facts, text_facts, queries)
    return SynthCorpus(db=db, planted=planted)


def _cue_relation(fact: Fact, cue: dict[str, str]) -> str:
    """Recover the relation whose cue word a text fact carries."""
    by_word = {w: r for r, w in cue.items()}
    for tok in fact.tokens:
        if tok in by_word:
            return by_word[tok]
    raise AssertionError(f"text fact {fact.fact_id} carries no cue word")
