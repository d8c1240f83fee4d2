"""Finite-difference validation of the hand-rolled backward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..store import (
    BLANK,
    OBJ_SLOT,
    SUBJ_SLOT,
    Entity,
    Fact,
    FactDatabase,
    FactSet,
    Query,
    Relation,
)
from .params import ModelConfig, ModelParameters, Vocabulary
from .training import loss_forward, query_loss_and_grads


@dataclass
class GradCheckCase:
    db: FactDatabase
    query: Query
    facts: FactSet
    target_row: int


def make_toy_case(dim: int = 4, hops: int = 3, seed: int = 0,
                  hop_weights: str = "per-hop"
                  ) -> tuple[ModelParameters, GradCheckCase]:
    """A tiny mixed KB + text instance that touches every parameter group."""
    entities = [Entity(f"e{i}", f"E{i}") for i in range(4)]
    relations = [Relation("r0"), Relation("r1")]
    kb = [
        Fact("kb:0", "kb", subject="e0", object="e1", relation="r0"),
        Fact("kb:1", "kb", subject="e0", object="e2", relation="r1"),
    ]
    text = [
        Fact("txt:0", "text", subject="e0", object="e3",
             tokens=("wa", SUBJ_SLOT, "wb", OBJ_SLOT)),
    ]
    query = Query("q0", tokens=("wc", "e0", "wa", BLANK), answer="e1")
    db = FactDatabase(entities, relations, kb, text, [query])
    cfg = ModelConfig(embed_dim=dim, hops=hops, learning_rate=0.1, epochs=0,
                      seed=seed, hop_weights=hop_weights)
    params = ModelParameters.initialize(cfg, Vocabulary.from_database(db))
    facts = FactSet([f.fact_id for f in kb + text], db)
    target_row = params.vocab.entity_index[query.answer]
    return params, GradCheckCase(db, query, facts, target_row)


def gradient_check(params: ModelParameters, case: GradCheckCase,
                   epsilon: float = 1e-5, n_coords: int = 200,
                   seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least `n_coords` coordinates, cycling through every
    parameter group so each one is covered. The error is relative where
    the gradient is significant and absolute against 1e-3 where it is
    tiny: central differences bottom out near 1e-11 on this loss, so an
    unguarded ratio would only measure floating-point noise there.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    _, grads = query_loss_and_grads(case.query, case.facts, params, case.db,
                                    case.target_row)
    rng = np.random.default_rng(seed)
    groups = params.groups()
    coords: list[tuple[str, int]] = []
    g = 0
    while len(coords) < n_coords:
        name = groups[g % len(groups)]
        coords.append((name, int(rng.integers(params[name].size))))
        g += 1

    max_rel = 0.0
    for name, flat_idx in coords:
        arr = params.arrays[name]
        orig = arr.flat[flat_idx]
        arr.flat[flat_idx] = orig + epsilon
        loss_plus, _ = loss_forward(case.query, case.facts, params, case.db,
                                    case.target_row)
        arr.flat[flat_idx] = orig - epsilon
        loss_minus, _ = loss_forward(case.query, case.facts, params, case.db,
                                     case.target_row)
        arr.flat[flat_idx] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        analytic = grads[name].flat[flat_idx]
        rel = abs(analytic - numeric) / max(1e-3, abs(analytic), abs(numeric))
        max_rel = max(max_rel, rel)
    return max_rel
