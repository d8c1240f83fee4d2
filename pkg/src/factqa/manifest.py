"""Run manifests: every CLI run records its resolved config, seeds, and
content hashes of inputs and outputs, next to the outputs themselves."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str | Path, subcommand: str, args: dict,
                   seed: int | None, sub_seeds: dict, inputs: list,
                   outputs: list) -> Path:
    """Write manifest.json into out_dir; output paths are stored relative
    to out_dir so that identical reruns produce identical manifests."""
    out_dir = Path(out_dir)
    manifest = {
        "subcommand": subcommand,
        "args": args,
        "seed": seed,
        "sub_seeds": sub_seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(Path(p).relative_to(out_dir)): sha256_file(p)
                    for p in outputs},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                               ensure_ascii=False) + "\n", encoding="utf-8")
    return path
