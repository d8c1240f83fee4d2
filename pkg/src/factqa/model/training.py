"""Gradient-based training: softmax cross-entropy over all entities, SGD.

The backward pass is written out by hand (see gradcheck for the finite-
difference validation). Gradient clipping stays off unless an exploding
step is detected, after which updates are clipped to norm 5.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from ..seeds import subseed
from ..store import FactDatabase, FactSet, Query, retrieve_facts
from .lstm import lstm_forward  # noqa: F401  (re-exported for tests)
from .network import SequenceCache, _encode_sequence, _sequence_backward, text_fact_tokens
from .params import ModelConfig, ModelParameters, Vocabulary

logger = logging.getLogger(__name__)

_CLIP_TRIGGER = 50.0
_CLIP_NORM = 5.0


@dataclass
class _StepCache:
    query_cache: SequenceCache
    contexts: list[np.ndarray]  # c_0..c_h
    attentions: list[np.ndarray]
    vsums: list[np.ndarray]
    us: list[np.ndarray]
    K: np.ndarray
    V: np.ndarray
    fact_back: list[tuple]  # ("kb", s_row, r_row, o_row) | ("text", SequenceCache, o_row)
    b: np.ndarray
    logits: np.ndarray
    target_row: int


def loss_forward(q: Query, facts: FactSet, params: ModelParameters,
                 db: FactDatabase, target_row: int) -> tuple[float, _StepCache]:
    """Cross-entropy of the target entity under softmax over all logits."""
    d = params.embed_dim
    keys, values, fact_back = [], [], []
    for fact in facts.facts(db):
        o_row = params.vocab.entity_index[fact.object]
        if fact.kind == "kb":
            s_row = params.vocab.entity_index[fact.subject]
            r_row = params.vocab.relation_index[fact.relation]
            keys.append(np.concatenate([params["ent_emb"][s_row],
                                        params["rel_emb"][r_row]]))
            fact_back.append(("kb", s_row, r_row, o_row))
        else:
            vec, cache = _encode_sequence(text_fact_tokens(fact), params)
            keys.append(vec)
            fact_back.append(("text", cache, o_row))
        values.append(params["ent_emb"][o_row])
    m = len(keys)
    K = np.stack(keys) if m else np.zeros((0, 2 * d))
    V = np.stack(values) if m else np.zeros((0, d))

    context, query_cache = _encode_sequence(q.tokens, params)
    contexts, attentions, vsums, us = [context], [], [], []
    for hop in range(1, params.config.hops + 1):
        if m:
            scores = K @ context
            e = np.exp(scores - scores.max())
            attention = e / e.sum()
            vsum = attention @ V
        else:
            attention = np.zeros(0)
            vsum = np.zeros(d)
        padded = np.concatenate([vsum, np.zeros(d)])
        u = context + params["proj_W"] @ padded
        context = params.hop_matrix(hop) @ u
        contexts.append(context)
        attentions.append(attention)
        vsums.append(vsum)
        us.append(u)

    b = params["out_W"] @ context + params["out_b"]
    logits = params["ent_emb"] @ b
    lmax = logits.max()
    loss = float(lmax + np.log(np.exp(logits - lmax).sum()) - logits[target_row])
    return loss, _StepCache(query_cache, contexts, attentions, vsums, us,
                            K, V, fact_back, b, logits, target_row)


def loss_backward(cache: _StepCache, params: ModelParameters,
                  grads: dict[str, np.ndarray]) -> None:
    """Accumulate d(loss)/d(params) into `grads`."""
    d = params.embed_dim
    hops = params.config.hops
    m = cache.K.shape[0]

    e = np.exp(cache.logits - cache.logits.max())
    dlogits = e / e.sum()
    dlogits[cache.target_row] -= 1.0

    grads["ent_emb"] += np.outer(dlogits, cache.b)
    db_vec = params["ent_emb"].T @ dlogits
    grads["out_W"] += np.outer(db_vec, cache.contexts[-1])
    grads["out_b"] += db_vec
    dc = params["out_W"].T @ db_vec

    dK = np.zeros_like(cache.K)
    dV = np.zeros_like(cache.V)
    shared = params["hop_W"].shape[0] == 1
    for hop in range(hops, 0, -1):
        u = cache.us[hop - 1]
        vsum = cache.vsums[hop - 1]
        a = cache.attentions[hop - 1]
        c_prev = cache.contexts[hop - 1]
        W_t = params.hop_matrix(hop)
        grads["hop_W"][0 if shared else hop - 1] += np.outer(dc, u)
        du = W_t.T @ dc
        padded = np.concatenate([vsum, np.zeros(d)])
        grads["proj_W"] += np.outer(du, padded)
        dpad = params["proj_W"].T @ du
        dvsum = dpad[:d]
        dc_prev = du.copy()
        if m:
            da = cache.V @ dvsum
            dV += a[:, None] * dvsum[None, :]
            ds = a * (da - float(a @ da))
            dc_prev += cache.K.T @ ds
            dK += ds[:, None] * c_prev[None, :]
        dc = dc_prev

    _sequence_backward(dc, cache.query_cache, params, grads)
    for i, back in enumerate(cache.fact_back):
        if back[0] == "kb":
            _, s_row, r_row, o_row = back
            grads["ent_emb"][s_row] += dK[i, :d]
            grads["rel_emb"][r_row] += dK[i, d:]
        else:
            _, seq_cache, o_row = back
            _sequence_backward(dK[i], seq_cache, params, grads)
        grads["ent_emb"][o_row] += dV[i]


def query_loss_and_grads(q: Query, facts: FactSet, params: ModelParameters,
                         db: FactDatabase, target_row: int
                         ) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and full gradient for a single query (used by gradcheck)."""
    grads = params.zero_grads()
    loss, cache = loss_forward(q, facts, params, db, target_row)
    loss_backward(cache, params, grads)
    return loss, grads


# -- training loop ---------------------------------------------------------


@dataclass
class TrainResult:
    params: ModelParameters
    history: list[dict]  # per epoch: epoch, loss, train_accuracy, heldout_accuracy
    train_query_ids: tuple[str, ...]
    heldout_query_ids: tuple[str, ...]

    @property
    def final_heldout_accuracy(self) -> float:
        return self.history[-1]["heldout_accuracy"] if self.history else float("nan")


def split_queries(db: FactDatabase, cfg: ModelConfig
                  ) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Seed-pinned train/held-out split over sorted query ids."""
    qids = sorted(db.queries)
    rng = np.random.default_rng(subseed(cfg.seed, "split"))
    perm = [qids[i] for i in rng.permutation(len(qids))]
    n_hold = int(round(cfg.holdout_fraction * len(qids)))
    return tuple(sorted(perm[n_hold:])), tuple(sorted(perm[:n_hold]))


def evaluate_accuracy(params: ModelParameters, db: FactDatabase,
                      query_ids, text_cap: int | None = None) -> float:
    """Fraction of queries whose argmax entity equals the ground truth.

    Queries with an empty retrieved fact set count as wrong.
    """
    from .network import answer  # local import to avoid cycle at module load

    cap = params.config.text_cap if text_cap is None else text_cap
    query_ids = list(query_ids)
    if not query_ids:
        return float("nan")
    correct = 0
    for qid in query_ids:
        q = db.queries[qid]
        facts = retrieve_facts(q, db, cap)
        if len(facts) == 0:
            continue
        if answer(q, facts, params, db).prediction == q.answer:
            correct += 1
    return correct / len(query_ids)


def train(db: FactDatabase, cfg: ModelConfig) -> TrainResult:
    """Mini-batch SGD on cross-entropy; deterministic for a given cfg.seed."""
    if not db.queries:
        raise ValueError("database has no queries to train on")
    vocab = Vocabulary.from_database(db)
    params = ModelParameters.initialize(cfg, vocab)
    train_ids, heldout_ids = split_queries(db, cfg)

    # resolve fact sets once; the retrieval result does not change
    fact_sets: dict[str, FactSet] = {}
    usable: list[str] = []
    for qid in train_ids:
        fs = retrieve_facts(db.queries[qid], db, cfg.text_cap)
        if len(fs) == 0:
            logger.warning("query %s retrieves no facts; skipped in training", qid)
            continue
        fact_sets[qid] = fs
        usable.append(qid)

    order_rng = np.random.default_rng(subseed(cfg.seed, "batches"))
    history: list[dict] = []
    clip = False
    for epoch in range(1, cfg.epochs + 1):
        order = [usable[i] for i in order_rng.permutation(len(usable))]
        losses: list[float] = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads = params.zero_grads()
            for qid in batch:
                q = db.queries[qid]
                target_row = vocab.entity_index[q.answer]
                loss, cache = loss_forward(q, fact_sets[qid], params, db, target_row)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"loss became non-finite at epoch {epoch}, query {qid}")
                loss_backward(cache, params, grads)
                losses.append(loss)
            scale = 1.0 / len(batch)
            gnorm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values()))) * scale
            if not np.isfinite(gnorm):
                raise DivergenceError(f"gradient became non-finite at epoch {epoch}")
            if gnorm > _CLIP_TRIGGER and not clip:
                clip = True
                logger.warning("gradient norm %.2f exceeded %.1f at epoch %d; "
                               "clipping to norm %.1f from now on",
                               gnorm, _CLIP_TRIGGER, epoch, _CLIP_NORM)
            if clip and gnorm > _CLIP_NORM:
                scale *= _CLIP_NORM / gnorm
            for name in params.arrays:
                params.arrays[name] -= cfg.learning_rate * scale * grads[name]
        row = {
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else float("nan"),
            "train_accuracy": evaluate_accuracy(params, db, usable, cfg.text_cap),
            "heldout_accuracy": evaluate_accuracy(params, db, heldout_ids, cfg.text_cap),
        }
        history.append(row)
        logger.info("epoch %d: loss=%.4f train_acc=%.3f heldout_acc=%.3f",
                    epoch, row["loss"], row["train_accuracy"],
                    row["heldout_accuracy"])
    return TrainResult(params, history, train_ids, heldout_ids)
