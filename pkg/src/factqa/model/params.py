"""Model configuration, vocabulary, and the named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import CheckpointError
from ..seeds import subseed
from ..store import BLANK, OBJ_SLOT, SUBJ_SLOT, FactDatabase

OOV = "<unk>"


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 16
    hops: int = 3
    learning_rate: float = 0.2
    epochs: int = 30
    seed: int = 0
    batch_size: int = 8
    holdout_fraction: float = 0.2
    hop_weights: str = "per-hop"  # "per-hop" | "shared"
    text_cap: int = 500

    def __post_init__(self):
        if self.embed_dim < 2:
            raise ValueError("embed_dim must be >= 2")
        if self.hops < 1:
            raise ValueError("hops must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")
        if self.hop_weights not in ("per-hop", "shared"):
            raise ValueError("hop_weights must be 'per-hop' or 'shared'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


@dataclass(frozen=True)
class Vocabulary:
    """Index spaces for entities, relations, and plain word tokens.

    Word row 0 is the out-of-vocabulary embedding; unknown tokens map there
    instead of erroring so that facts with unseen token mixes stay encodable.
    """

    entity_ids: tuple[str, ...]
    relation_ids: tuple[str, ...]
    words: tuple[str, ...]  # words[0] == OOV
    entity_index: dict = field(compare=False, repr=False, default=None)
    word_index: dict = field(compare=False, repr=False, default=None)
    relation_index: dict = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "entity_index",
                           {e: i for i, e in enumerate(self.entity_ids)})
        object.__setattr__(self, "word_index",
                           {w: i for i, w in enumerate(self.words)})
        object.__setattr__(self, "relation_index",
                           {r: i for i, r in enumerate(self.relation_ids)})

    @classmethod
    def from_database(cls, db: FactDatabase) -> "Vocabulary":
        words: set[str] = {BLANK}
        for q in db.queries.values():
            for tok in q.tokens:
                if tok not in db.entities and tok != BLANK:
                    words.add(tok)
        for f in db.text_facts.values():
            for tok in f.tokens:
                if tok in (SUBJ_SLOT, OBJ_SLOT):
                    continue
                if tok not in db.entities:
                    words.add(tok)
        return cls(
            entity_ids=tuple(sorted(db.entities)),
            relation_ids=tuple(sorted(db.relations)),
            words=(OOV,) + tuple(sorted(words)),
        )

    def to_dict(self) -> dict:
        return {
            "entity_ids": list(self.entity_ids),
            "relation_ids": list(self.relation_ids),
            "words": list(self.words),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabulary":
        return cls(
            entity_ids=tuple(obj["entity_ids"]),
            relation_ids=tuple(obj["relation_ids"]),
            words=tuple(obj["words"]),
        )


# parameter group name -> shape builder; LSTM gate order is i, f, o, g
def _group_shapes(cfg: ModelConfig, n_entities: int, n_relations: int,
                  n_words: int) -> dict[str, tuple[int, ...]]:
    d = cfg.embed_dim
    n_hop_mats = cfg.hops if cfg.hop_weights == "per-hop" else 1
    return {
        "ent_emb": (n_entities, d),
        "rel_emb": (n_relations, d),
        "word_emb": (n_words, d),
        "fw_Wx": (4 * d, d),
        "fw_Wh": (4 * d, d),
        "fw_b": (4 * d,),
        "bw_Wx": (4 * d, d),
        "bw_Wh": (4 * d, d),
        "bw_b": (4 * d,),
        "hop_W": (n_hop_mats, 2 * d, 2 * d),
        "proj_W": (2 * d, 2 * d),
        "out_W": (d, 2 * d),
        "out_b": (d,),
    }

_EMBED_GROUPS = ("ent_emb", "rel_emb", "word_emb")


class ModelParameters:
    """Named float64 tensors plus the config and vocabulary they assume."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary,
                 arrays: dict[str, np.ndarray]):
        self.config = config
        self.vocab = vocab
        self.arrays = arrays
        self._check_shapes()

    def _check_shapes(self) -> None:
        expected = _group_shapes(self.config, len(self.vocab.entity_ids),
                                 len(self.vocab.relation_ids), len(self.vocab.words))
        if set(expected) != set(self.arrays):
            raise CheckpointError(
                f"parameter groups {sorted(self.arrays)} do not match "
                f"expected {sorted(expected)}"
            )
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise CheckpointError(
                    f"group {name!r} has shape {self.arrays[name].shape}, "
                    f"expected {shape}"
                )

    @classmethod
    def initialize(cls, config: ModelConfig, vocab: Vocabulary) -> "ModelParameters":
        """Embeddings ~ N(0, 0.1); encoder weights/biases ~ U(-0.1, 0.1).

        The square context transforms start at identity plus U(-0.1, 0.1)
        noise and the output layer at the half-sum of the two context
        halves plus noise: with small-uniform starts the context shrinks
        roughly threefold per hop and the answer signal dies before the
        output layer.
        """
        rng = np.random.default_rng(subseed(config.seed, "init"))
        d = config.embed_dim
        shapes = _group_shapes(config, len(vocab.entity_ids),
                               len(vocab.relation_ids), len(vocab.words))
        arrays = {}
        for name, shape in shapes.items():
            if name in _EMBED_GROUPS:
                arrays[name] = rng.normal(0.0, 0.1, size=shape)
            elif name == "hop_W":
                arrays[name] = np.stack([
                    np.eye(2 * d) + rng.uniform(-0.1, 0.1, size=(2 * d, 2 * d))
                    for _ in range(shape[0])
                ])
            elif name == "proj_W":
                arrays[name] = np.eye(2 * d) + rng.uniform(-0.1, 0.1, size=shape)
            elif name == "out_W":
                arrays[name] = (0.5 * np.concatenate([np.eye(d), np.eye(d)], axis=1)
                                + rng.uniform(-0.1, 0.1, size=shape))
            else:
                arrays[name] = rng.uniform(-0.1, 0.1, size=shape)
        return cls(config, vocab, arrays)

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, self.vocab,
                               {k: v.copy() for k, v in self.arrays.items()})

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def groups(self) -> tuple[str, ...]:
        return tuple(sorted(self.arrays))

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    def hop_matrix(self, hop_index: int) -> np.ndarray:
        """W for 1-based hop `hop_index`, honoring the shared/per-hop switch."""
        mats = self.arrays["hop_W"]
        return mats[0] if mats.shape[0] == 1 else mats[hop_index - 1]
