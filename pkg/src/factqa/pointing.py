"""Automatic pointing-game evaluation over hybrid fact sets.

A hybrid instance joins a query's real facts with a disjoint fake set
built from a donor query (subjects rebound, model-validated to not yield
the correct answer alone). An explanation method earns a hit point when
its top-scored fact is real; accuracy is the hit fraction over instances
the model answers correctly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import CoverageMismatchError, ExhaustedRetriesError
from .explain import RelevanceVector, make_explainer
from .seeds import subseed
from .store import FactDatabase, FactSet, Query, retrieve_facts, substitute_subjects

logger = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 25


@dataclass
class HybridInstance:
    query_id: str
    real: FactSet
    fake: FactSet
    combined: FactSet
    prediction: str  # equals the ground truth for kept instances
    db: FactDatabase  # extension in which the fake ids resolve

    @property
    def real_fraction(self) -> float:
        return len(self.real) / len(self.combined)


@dataclass
class PointingGameResult:
    method: str
    hits: int
    total: int
    accuracy: float
    hit_log: list[tuple[str, int]]  # (query_id, 0|1)

    def to_obj(self) -> dict:
        return {"method": self.method, "hits": self.hits, "total": self.total,
                "accuracy": self.accuracy}


@dataclass
class SignificanceResult:
    p_value: float
    significant: bool
    n_discordant: int
    favoring_a: int


def make_fake_facts(q: Query, db: FactDatabase, model, rng: np.random.Generator,
                    max_retries: int = DEFAULT_MAX_RETRIES,
                    text_cap: int = 500) -> tuple[FactSet, FactDatabase]:
    """Sample a donor query, rebind its facts' subjects, validate, retry.

    A candidate fake set is valid when the model cannot predict the
    ground-truth answer from it alone. Donors must have the same number
    of distinct entities as the target query.
    """
    n_entities = len(db.query_entities(q))
    candidates = [qid for qid in sorted(db.queries)
                  if qid != q.query_id
                  and len(db.query_entities(db.queries[qid])) == n_entities]
    if not candidates:
        raise ExhaustedRetriesError(
            f"no donor queries with {n_entities} distinct entities for {q.query_id!r}")
    order = [candidates[i] for i in rng.permutation(len(candidates))]
    attempts = 0
    for donor_id in order:
        if attempts >= max_retries:
            break
        attempts += 1
        donor_q = db.queries[donor_id]
        donor_facts = retrieve_facts(donor_q, db, text_cap)
        if len(donor_facts) == 0:
            continue
        fake, extended = substitute_subjects(donor_facts, donor_q, q, db)
        predicted = model.rebind(extended).answer(q, fake).prediction
        if predicted != q.answer:
            return fake, extended
    raise ExhaustedRetriesError(
        f"no valid fake fact set for {q.query_id!r} within {max_retries} attempts")


def build_hybrid(q: Query, db: FactDatabase, model, rng: np.random.Generator,
                 max_retries: int = DEFAULT_MAX_RETRIES,
                 text_cap: int = 500) -> tuple[HybridInstance | None, str]:
    """One hybrid instance, or (None, reason) when the query is skipped."""
    real = retrieve_facts(q, db, text_cap)
    if len(real) == 0:
        return None, "no-facts"
    try:
        fake, extended = make_fake_facts(q, db, model, rng, max_retries, text_cap)
    except ExhaustedRetriesError as exc:
        logger.info("skipping %s: %s", q.query_id, exc)
        return None, "exhausted-retries"
    combined = real.union(fake)
    prediction = model.rebind(extended).answer(q, combined).prediction
    if prediction != q.answer:
        return None, "wrong-answer"
    return HybridInstance(q.query_id, real, fake, combined, prediction, extended), "kept"


def build_hybrid_instances(db: FactDatabase, model, seed: int,
                           query_ids=None,
                           max_retries: int = DEFAULT_MAX_RETRIES,
                           text_cap: int = 500,
                           max_instances: int | None = None
                           ) -> tuple[list[HybridInstance], dict[str, int]]:
    """Hybrid instances for (a deterministic subset of) the corpus queries."""
    rng = np.random.default_rng(subseed(seed, "fakefacts"))
    instances: list[HybridInstance] = []
    skipped = {"no-facts": 0, "exhausted-retries": 0, "wrong-answer": 0}
    for qid in sorted(query_ids if query_ids is not None else db.queries):
        inst, reason = build_hybrid(db.queries[qid], db, model, rng,
                                    max_retries, text_cap)
        if inst is None:
            skipped[reason] += 1
            continue
        instances.append(inst)
        if max_instances is not None and len(instances) >= max_instances:
            break
    return instances, skipped


def hit(rv: RelevanceVector, inst: HybridInstance) -> int:
    """1 when the top-scored fact is real, 0 when it is fake."""
    if rv.fact_ids != inst.combined.ids:
        raise CoverageMismatchError(
            f"relevance vector covers {len(rv.fact_ids)} facts, instance "
            f"{inst.query_id!r} has {len(inst.combined)}")
    return 1 if rv.argmax_fact() in inst.real else 0


def pointing_game(instances: list[HybridInstance], model, method: str,
                  seed: int = 0, lime_samples: int = 1000) -> PointingGameResult:
    """Play the game for one method; per-instance sub-seeds keep the run
    reproducible regardless of instance order."""
    if not instances:
        raise ValueError("pointing_game needs at least one instance")
    hit_log: list[tuple[str, int]] = []
    for inst in instances:
        q = inst.db.queries[inst.query_id]
        bound = model.rebind(inst.db)
        explainer = make_explainer(method, lime_samples=lime_samples,
                                   seed=subseed(seed, f"{method}:{inst.query_id}"))
        rv = explainer(q, q.answer, inst.combined, bound)
        hit_log.append((inst.query_id, hit(rv, inst)))
    hits = sum(h for _, h in hit_log)
    return PointingGameResult(method, hits, len(hit_log), hits / len(hit_log), hit_log)


def binomial_significance(hits_a, hits_b, alpha: float = 0.05) -> SignificanceResult:
    """Exact two-sided sign test on discordant instances.

    Tests whether the count of a-hit/b-miss instances among all discordant
    ones is compatible with p = 0.5. With no discordant pairs, p = 1.0.
    """
    hits_a, hits_b = list(hits_a), list(hits_b)
    if len(hits_a) != len(hits_b):
        raise ValueError("hit logs must cover the same instances")
    favoring_a = sum(1 for a, b in zip(hits_a, hits_b) if a == 1 and b == 0)
    favoring_b = sum(1 for a, b in zip(hits_a, hits_b) if a == 0 and b == 1)
    n = favoring_a + favoring_b
    if n == 0:
        return SignificanceResult(1.0, False, 0, 0)
    p = float(stats.binomtest(favoring_a, n, 0.5, alternative="two-sided").pvalue)
    return SignificanceResult(p, p < alpha, n, favoring_a)


def expected_random_accuracy(instances: list[HybridInstance]) -> tuple[float, float]:
    """Mean real-fact fraction and its binomial-sum standard deviation.

    A uniform random explainer hits instance i with probability
    p_i = |real_i| / |combined_i|; over N instances the accuracy
    concentrates at mean(p_i) with sigma = sqrt(sum p_i (1 - p_i)) / N.
    """
    ps = np.array([inst.real_fraction for inst in instances])
    mean = float(ps.mean())
    sigma = float(np.sqrt((ps * (1.0 - ps)).sum()) / len(ps))
    return mean, sigma
