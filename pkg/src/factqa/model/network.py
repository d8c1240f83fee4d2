"""Forward inference: fact encoding, multi-hop attention, answer selection.

Every context/hop update follows
    c_t = W_t (c_{t-1} + W_p [vsum; 0])    with vsum = sum_i softmax(c_{t-1} . k_i) v_i
where keys are 2d-dimensional and the d-dimensional weighted value sum is
zero-padded before the projection. Memory cells are always processed in
fact_id order, so predictions are exactly invariant to input permutation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyFactSetError, EmptyMemoryError, UnknownEntityError
from ..store import BLANK, OBJ_SLOT, SUBJ_SLOT, Fact, FactDatabase, FactSet, Query
from .lstm import LstmCache, lstm_backward, lstm_forward
from .params import ModelParameters


@dataclass
class MemoryCell:
    fact_id: str
    key: np.ndarray  # (2d,)
    value: np.ndarray  # (d,)


@dataclass
class HopTrace:
    """Context vectors c_0..c_h and one attention row per hop."""

    contexts: list[np.ndarray]
    attentions: list[np.ndarray]


@dataclass
class AnswerResult:
    prediction: str
    b: np.ndarray  # (d,)
    logits: np.ndarray  # (|E|,)
    trace: HopTrace


# -- token embedding ------------------------------------------------------


def _token_ref(token: str, params: ModelParameters) -> tuple[str, int]:
    """Resolve a token to ("ent"|"word", row). Unknown tokens hit the OOV row."""
    vocab = params.vocab
    idx = vocab.entity_index.get(token)
    if idx is not None:
        return ("ent", idx)
    widx = vocab.word_index.get(token)
    if widx is not None:
        return ("word", widx)
    return ("word", 0)


def _embed_tokens(tokens: tuple[str, ...], params: ModelParameters
                  ) -> tuple[np.ndarray, list[tuple[str, int]]]:
    refs = [_token_ref(tok, params) for tok in tokens]
    xs = np.stack([params[f"{kind}_emb"][row] for kind, row in refs])
    return xs, refs


@dataclass
class SequenceCache:
    """Everything the encoder backward pass needs for one sequence."""

    refs: list[tuple[str, int]]
    fw: LstmCache
    bw: LstmCache


def _encode_sequence(tokens: tuple[str, ...], params: ModelParameters
                     ) -> tuple[np.ndarray, SequenceCache]:
    if len(tokens) == 0:
        raise ValueError("cannot encode an empty token sequence")
    xs, refs = _embed_tokens(tokens, params)
    h_fw, fw_cache = lstm_forward(xs, params["fw_Wx"], params["fw_Wh"], params["fw_b"])
    h_bw, bw_cache = lstm_forward(xs[::-1], params["bw_Wx"], params["bw_Wh"],
                                  params["bw_b"])
    return np.concatenate([h_fw, h_bw]), SequenceCache(refs, fw_cache, bw_cache)


def encode_sequence(tokens, params: ModelParameters) -> np.ndarray:
    """Concatenated final hidden states of the two recurrent directions (2d)."""
    vec, _ = _encode_sequence(tuple(tokens), params)
    return vec


def _sequence_backward(dvec: np.ndarray, cache: SequenceCache,
                       params: ModelParameters, grads: dict) -> None:
    """Accumulate encoder and embedding gradients for one encoded sequence."""
    d = params.embed_dim
    dWx, dWh, db, dxs_fw = lstm_backward(dvec[:d], cache.fw,
                                         params["fw_Wx"], params["fw_Wh"])
    grads["fw_Wx"] += dWx
    grads["fw_Wh"] += dWh
    grads["fw_b"] += db
    dWx, dWh, db, dxs_bw = lstm_backward(dvec[d:], cache.bw,
                                         params["bw_Wx"], params["bw_Wh"])
    grads["bw_Wx"] += dWx
    grads["bw_Wh"] += dWh
    grads["bw_b"] += db
    dxs = dxs_fw + dxs_bw[::-1]
    for (kind, row), dx in zip(cache.refs, dxs):
        grads[f"{kind}_emb"][row] += dx


# -- memory cells ---------------------------------------------------------


def text_fact_tokens(fact: Fact) -> tuple[str, ...]:
    """Inline the subject and blank out the object slot, as the encoder sees it."""
    return tuple(
        fact.subject if tok == SUBJ_SLOT else BLANK if tok == OBJ_SLOT else tok
        for tok in fact.tokens
    )


def _entity_row(entity_id: str, params: ModelParameters) -> int:
    row = params.vocab.entity_index.get(entity_id)
    if row is None:
        raise UnknownEntityError(f"unknown entity id {entity_id!r}")
    return row


def encode_kb_fact(fact: Fact, params: ModelParameters) -> MemoryCell:
    """key = [subject_emb; relation_emb], value = object_emb."""
    if fact.kind != "kb":
        raise ValueError(f"{fact.fact_id!r} is not a KB fact")
    s_row = _entity_row(fact.subject, params)
    o_row = _entity_row(fact.object, params)
    r_row = params.vocab.relation_index.get(fact.relation)
    if r_row is None:
        raise UnknownEntityError(f"unknown relation id {fact.relation!r}")
    key = np.concatenate([params["ent_emb"][s_row], params["rel_emb"][r_row]])
    return MemoryCell(fact.fact_id, key, params["ent_emb"][o_row].copy())


def encode_text_fact(fact: Fact, params: ModelParameters) -> MemoryCell:
    """key = encoded sentence (subject inlined, object blanked), value = object_emb."""
    if fact.kind != "text":
        raise ValueError(f"{fact.fact_id!r} is not a text fact")
    o_row = _entity_row(fact.object, params)
    key = encode_sequence(text_fact_tokens(fact), params)
    return MemoryCell(fact.fact_id, key, params["ent_emb"][o_row].copy())


def build_cells(facts: FactSet, db: FactDatabase,
                params: ModelParameters) -> list[MemoryCell]:
    cells = []
    for fact in facts.facts(db):
        if fact.kind == "kb":
            cells.append(encode_kb_fact(fact, params))
        else:
            cells.append(encode_text_fact(fact, params))
    return cells


# -- hops and answer selection --------------------------------------------


def _softmax(scores: np.ndarray) -> np.ndarray:
    e = np.exp(scores - scores.max())
    return e / e.sum()


def _pad_to_context(vsum: np.ndarray) -> np.ndarray:
    return np.concatenate([vsum, np.zeros_like(vsum)])


def _hop_update(context: np.ndarray, K: np.ndarray | None, V: np.ndarray | None,
                W_t: np.ndarray, W_p: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """One context update; empty memory contributes a zero value sum."""
    if K is None or K.shape[0] == 0:
        attention = np.zeros(0)
        vsum = np.zeros(W_p.shape[0] // 2)
    else:
        attention = _softmax(K @ context)
        vsum = attention @ V
    new_context = W_t @ (context + W_p @ _pad_to_context(vsum))
    return new_context, attention


def attend_hop(context: np.ndarray, cells: list[MemoryCell],
               params: ModelParameters, hop_index: int
               ) -> tuple[np.ndarray, np.ndarray]:
    """Single attention hop over non-empty memory; returns (c_t, attention)."""
    if not cells:
        raise EmptyMemoryError("attention over an empty memory is undefined")
    if not 1 <= hop_index <= params.config.hops:
        raise ValueError(f"hop_index {hop_index} outside 1..{params.config.hops}")
    K = np.stack([c.key for c in cells])
    V = np.stack([c.value for c in cells])
    return _hop_update(context, K, V, params.hop_matrix(hop_index), params["proj_W"])


def _forward(q: Query, facts: FactSet, params: ModelParameters, db: FactDatabase,
             cells: list[MemoryCell] | None = None,
             query_vec: np.ndarray | None = None
             ) -> tuple[np.ndarray, np.ndarray, HopTrace]:
    """Full forward pass; returns (b, logits, trace). Handles empty memory."""
    if cells is None:
        cells = build_cells(facts, db, params)
    context = encode_sequence(q.tokens, params) if query_vec is None else query_vec
    K = np.stack([c.key for c in cells]) if cells else None
    V = np.stack([c.value for c in cells]) if cells else None
    trace = HopTrace(contexts=[context], attentions=[])
    for hop in range(1, params.config.hops + 1):
        context, attention = _hop_update(context, K, V,
                                         params.hop_matrix(hop), params["proj_W"])
        trace.contexts.append(context)
        trace.attentions.append(attention)
    b = params["out_W"] @ context + params["out_b"]
    logits = params["ent_emb"] @ b
    return b, logits, trace


def answer(q: Query, facts: FactSet, params: ModelParameters, db: FactDatabase,
           cells: list[MemoryCell] | None = None,
           query_vec: np.ndarray | None = None) -> AnswerResult:
    """Predict the entity with the highest inner product against b.

    Ties break toward the smallest entity id (entity rows are sorted by id
    and argmax returns the first maximum).
    """
    if len(facts) == 0:
        raise EmptyFactSetError(f"query {q.query_id!r} has an empty fact set")
    b, logits, trace = _forward(q, facts, params, db, cells, query_vec)
    prediction = params.vocab.entity_ids[int(np.argmax(logits))]
    return AnswerResult(prediction, b, logits, trace)


def logit(q: Query, facts: FactSet, entity_id: str, params: ModelParameters,
          db: FactDatabase, cells: list[MemoryCell] | None = None,
          query_vec: np.ndarray | None = None) -> float:
    """The entity's component of E.b; defined on an empty fact set too

    (the zero-memory path: every hop sees a zero value sum).
    """
    row = _entity_row(entity_id, params)
    _, logits, _ = _forward(q, facts, params, db, cells, query_vec)
    return float(logits[row])


def masked_logits(q: Query, facts: FactSet, masks: np.ndarray, entity_id: str,
                  params: ModelParameters, db: FactDatabase,
                  cells: list[MemoryCell] | None = None,
                  query_vec: np.ndarray | None = None) -> np.ndarray:
    """Target-entity logits for many fact-presence masks at once.

    masks is (n, |facts|) with 1 = fact present. Absent facts are excluded
    from the softmax; an all-zero row follows the zero-memory path.
    """
    masks = np.asarray(masks, dtype=bool)
    if masks.ndim != 2 or masks.shape[1] != len(facts):
        raise ValueError(f"masks must be (n, {len(facts)})")
    row = _entity_row(entity_id, params)
    if cells is None:
        cells = build_cells(facts, db, params)
    n = masks.shape[0]
    d = params.embed_dim
    if len(cells) == 0:
        K = np.zeros((0, 2 * d))
        V = np.zeros((0, d))
    else:
        K = np.stack([c.key for c in cells])
        V = np.stack([c.value for c in cells])
    if query_vec is None:
        query_vec = encode_sequence(q.tokens, params)
    C = np.tile(query_vec, (n, 1))
    W_p = params["proj_W"]
    nonempty = masks.any(axis=1)
    for hop in range(1, params.config.hops + 1):
        if K.shape[0] > 0:
            S = C @ K.T  # (n, m)
            S = np.where(masks, S, -np.inf)
            smax = S.max(axis=1, keepdims=True)
            smax[~nonempty] = 0.0
            A = np.where(masks, np.exp(S - smax), 0.0)
            denom = A.sum(axis=1, keepdims=True)
            denom[~nonempty] = 1.0
            A /= denom
            vsum = A @ V  # (n, d)
        else:
            vsum = np.zeros((n, d))
        padded = np.concatenate([vsum, np.zeros_like(vsum)], axis=1)
        C = (C + padded @ W_p.T) @ params.hop_matrix(hop).T
    B = C @ params["out_W"].T + params["out_b"]
    return B @ params["ent_emb"][row]


# -- bound model ----------------------------------------------------------


class QAModel:
    """Parameters bound to a database, with encoding caches and an
    inference counter (one count per forward pass / mask row)."""

    def __init__(self, params: ModelParameters, db: FactDatabase,
                 _seq_cache: dict | None = None):
        self.params = params
        self.db = db
        self._seq_cache: dict = {} if _seq_cache is None else _seq_cache
        self.inference_count = 0

    def rebind(self, db: FactDatabase) -> "QAModel":
        """Same parameters and encoding cache over another database view."""
        return QAModel(self.params, db, _seq_cache=self._seq_cache)

    def _cached_sequence(self, tokens: tuple[str, ...]) -> np.ndarray:
        vec = self._seq_cache.get(tokens)
        if vec is None:
            vec = encode_sequence(tokens, self.params)
            self._seq_cache[tokens] = vec
        return vec

    def cells(self, facts: FactSet) -> list[MemoryCell]:
        out = []
        for fact in facts.facts(self.db):
            if fact.kind == "kb":
                out.append(encode_kb_fact(fact, self.params))
            else:
                o_row = _entity_row(fact.object, self.params)
                key = self._cached_sequence(text_fact_tokens(fact))
                out.append(MemoryCell(fact.fact_id, key, self.params["ent_emb"][o_row]))
        return out

    def answer(self, q: Query, facts: FactSet) -> AnswerResult:
        if len(facts) == 0:
            raise EmptyFactSetError(f"query {q.query_id!r} has an empty fact set")
        self.inference_count += 1
        return answer(q, facts, self.params, self.db, cells=self.cells(facts),
                      query_vec=self._cached_sequence(q.tokens))

    def logit(self, q: Query, facts: FactSet, entity_id: str) -> float:
        self.inference_count += 1
        return logit(q, facts, entity_id, self.params, self.db,
                     cells=self.cells(facts),
                     query_vec=self._cached_sequence(q.tokens))

    def masked_logits(self, q: Query, facts: FactSet, masks: np.ndarray,
                      entity_id: str) -> np.ndarray:
        masks = np.asarray(masks)
        self.inference_count += masks.shape[0]
        return masked_logits(q, facts, masks, entity_id, self.params, self.db,
                             cells=self.cells(facts),
                             query_vec=self._cached_sequence(q.tokens))

    def trace(self, q: Query, facts: FactSet) -> HopTrace:
        return self.answer(q, facts).trace
