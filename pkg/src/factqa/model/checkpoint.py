"""Single-file model checkpoints.

Layout: a magic/version line, a JSON header line (config, vocabulary,
extra metadata, array manifest), then the raw little-endian float64
buffers in manifest order. Loading rejects any dimension mismatch.
Writing the same parameters twice yields byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .params import ModelConfig, ModelParameters, Vocabulary

MAGIC = b"FACTQA-CKPT 1\n"


def save_checkpoint(path: str | Path, params: ModelParameters,
                    extra: dict | None = None) -> None:
    names = sorted(params.arrays)
    header = {
        "config": params.config.to_dict(),
        "vocab": params.vocab.to_dict(),
        "extra": extra or {},
        "arrays": [{"name": n, "shape": list(params[n].shape), "dtype": "<f8"}
                   for n in names],
    }
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8"))
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[ModelParameters, dict]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a model checkpoint "
                                  f"(bad header {magic[:20]!r})")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CheckpointError(f"{path}: malformed header: {exc}") from exc
        config = ModelConfig.from_dict(header["config"])
        vocab = Vocabulary.from_dict(header["vocab"])
        arrays: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise CheckpointError(f"{path}: truncated tensor {spec['name']!r}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError(f"{path}: trailing bytes after tensors")
    # ModelParameters validates every shape against the config/vocab
    return ModelParameters(config, vocab, arrays), header.get("extra", {})
