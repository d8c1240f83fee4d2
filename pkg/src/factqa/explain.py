"""Explanation methods: one relevance score per fact for a (query, answer) pair.

All methods share the signature (q, a_q, facts, model, ...) and return
scores over the identical fact ordering (ascending fact_id), so rankings
are directly comparable across methods.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDesignError
from .store import FactSet, Query

IP_ZERO_DENOM = 1e-9


@dataclass(frozen=True)
class RelevanceVector:
    fact_ids: tuple[str, ...]
    scores: tuple[float, ...]
    method: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.fact_ids) != len(self.scores):
            raise ValueError("fact_ids and scores lengths differ")
        if not all(np.isfinite(self.scores)):
            raise ValueError(f"non-finite relevance score in method {self.method!r}")

    def score_of(self, fact_id: str) -> float:
        return self.scores[self.fact_ids.index(fact_id)]

    def argmax_fact(self) -> str:
        """Highest-scored fact id; ties break toward the smallest fact_id."""
        best = 0
        for i in range(1, len(self.scores)):
            if self.scores[i] > self.scores[best]:
                best = i
        return self.fact_ids[best]

    def to_obj(self, query_id: str, answer: str) -> dict:
        return {
            "query_id": query_id,
            "method": self.method,
            "answer": answer,
            "scores": [{"fact_id": fid, "score": s}
                       for fid, s in zip(self.fact_ids, self.scores)],
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class SurrogateWeights:
    weights: np.ndarray  # (|facts|,)
    intercept: float
    residual_norm: float
    ridged: bool = False


def explain_attention(q: Query, a_q: str, facts: FactSet, model,
                      mode: int | str = "average") -> RelevanceVector:
    """Attention-weight scores: one hop's softmax row, or the mean over hops.

    `mode` is a 1-based hop index or "average". Hop j's row is the softmax
    of key scores against the context entering that hop.
    """
    hops = model.params.config.hops
    trace = model.trace(q, facts)
    if mode == "average":
        scores = np.mean(np.stack(trace.attentions), axis=0)
        tag = "awavg"
    else:
        j = int(mode)
        if not 1 <= j <= hops:
            raise ValueError(f"hop index {j} outside 1..{hops}")
        scores = trace.attentions[j - 1]
        tag = f"aw{j}"
    return RelevanceVector(facts.ids, tuple(float(s) for s in scores), tag)


def fit_surrogate(masks: np.ndarray, responses: np.ndarray) -> SurrogateWeights:
    """Ordinary least squares with intercept; ridge (lambda=1e-8) fallback
    when the sampled design is rank-deficient."""
    n, m = masks.shape
    X = np.concatenate([masks.astype(float), np.ones((n, 1))], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(X, responses, rcond=None)
    ridged = False
    if rank < m + 1:
        lam = 1e-8
        gram = X.T @ X + lam * np.eye(m + 1)
        coef = np.linalg.solve(gram, X.T @ responses)
        ridged = True
    if not np.isfinite(coef).all():
        raise DegenerateDesignError(
            "surrogate fit produced non-finite coefficients even after ridge fallback")
    residual = float(np.linalg.norm(responses - X @ coef))
    return SurrogateWeights(coef[:m], float(coef[m]), residual, ridged)


def explain_lime(q: Query, a_q: str, facts: FactSet, model,
                 n_samples: int = 1000, seed: int = 0) -> RelevanceVector:
    """Local linear surrogate over bag-of-facts masks.

    Draws `n_samples` masks with independent Bernoulli(0.5) entries
    (all-zero and all-one masks are kept), scores the target answer's
    logit under each induced subset, and returns the least-squares
    weights. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(n_samples, len(facts)))
    responses = model.masked_logits(q, facts, masks, a_q)
    fit = fit_surrogate(masks, np.asarray(responses, dtype=float))
    flags = ("ridge-fallback",) if fit.ridged else ()
    return RelevanceVector(facts.ids, tuple(float(w) for w in fit.weights),
                           "lime", flags)


def explain_ip(q: Query, a_q: str, facts: FactSet, model) -> RelevanceVector:
    """Leave-one-out logit differences, normalized by the full-set logit.

    score(f) = (logit(F) - logit(F \\ {f})) / logit(F). Issues exactly
    |facts| + 1 model inferences. When |logit(F)| < 1e-9 the scores fall
    back to unnormalized differences and the vector is flagged.
    """
    full = model.logit(q, facts, a_q)
    diffs = [full - model.logit(q, facts.without(fid), a_q) for fid in facts.ids]
    if abs(full) < IP_ZERO_DENOM:
        return RelevanceVector(facts.ids, tuple(diffs), "ip", ("unnormalized",))
    return RelevanceVector(facts.ids, tuple(dd / full for dd in diffs), "ip")


def explain_random(q: Query, a_q: str, facts: FactSet, model,
                   seed: int = 0) -> RelevanceVector:
    """Uniform random scores; the reference baseline for the pointing game."""
    rng = np.random.default_rng(seed)
    return RelevanceVector(facts.ids, tuple(rng.random(len(facts))), "random")


def top_k(rv: RelevanceVector, facts: FactSet, k: int = 5) -> list[str]:
    """The k fact ids with the highest scores (descending), ties broken by
    ascending fact_id; all of them when fewer than k facts exist."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if rv.fact_ids != facts.ids:
        raise ValueError("relevance vector does not cover the fact set")
    ranked = sorted(zip(rv.scores, rv.fact_ids), key=lambda p: (-p[0], p[1]))
    return [fid for _, fid in ranked[:k]]


METHOD_NAMES = ("aw1", "aw2", "aw3", "awavg", "lime", "ip", "random")


def make_explainer(name: str, lime_samples: int = 1000, seed: int = 0):
    """Explainer callable for a method tag like aw1/aw3/awavg/lime/ip/random.

    lime and random draw their per-call seed from `seed`; attention/ip are
    deterministic already.
    """
    if name.startswith("aw") and name != "awavg":
        hop = int(name[2:])
        return lambda q, a_q, facts, model: explain_attention(q, a_q, facts, model, hop)
    if name == "awavg":
        return lambda q, a_q, facts, model: explain_attention(q, a_q, facts, model, "average")
    if name == "lime":
        return lambda q, a_q, facts, model: explain_lime(
            q, a_q, facts, model, n_samples=lime_samples, seed=seed)
    if name == "ip":
        return explain_ip
    if name == "random":
        return lambda q, a_q, facts, model: explain_random(q, a_q, facts, model, seed=seed)
    raise ValueError(f"unknown explanation method {name!r}")


def dump_explanations(rows: list[dict], path: str | Path) -> None:
    """Append-free JSONL dump: one object per (query, method)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
