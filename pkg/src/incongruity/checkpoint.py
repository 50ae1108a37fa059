"""Single-file ``.npz`` checkpoints.

Layout:

``manifest``
    JSON string with ``format``, ``model_config``, ``vocab`` (min_count and
    tokens after the two reserved ones), ``params`` (name -> shape),
    ``embedding_shape``, ``coverage_rate`` and ``state`` (training counters).
``embedding``
    the frozen ``|V| x embed_dim`` table.
``param/<name>``
    one array per trainable tensor.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import BGHDE, ModelConfig
from .textenc import Vocabulary

FORMAT = "incongruity-checkpoint/1"


def save_checkpoint(path: str | Path, model: BGHDE, vocab: Vocabulary, state: dict | None = None,
                    coverage_rate: float | None = None) -> None:
    if len(vocab) != model.embeddings.shape[0]:
        raise ValueError("vocabulary size does not match the embedding table")
    manifest = {
        "format": FORMAT,
        "model_config": model.config.to_dict(),
        "vocab": vocab.to_json(),
        "params": {k: list(v.shape) for k, v in model.params.items()},
        "embedding_shape": list(model.embeddings.shape),
        "coverage_rate": coverage_rate,
        "state": state or {},
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, manifest=np.array(json.dumps(manifest, ensure_ascii=False)),
                 embedding=model.embeddings, **arrays)


def load_checkpoint(path: str | Path) -> tuple[BGHDE, Vocabulary, dict]:
    with np.load(path, allow_pickle=False) as z:
        manifest = json.loads(str(z["manifest"]))
        if manifest.get("format") != FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {manifest.get('format')!r}")
        params = {k: z[f"param/{k}"] for k in manifest["params"]}
        embedding = z["embedding"]
    for k, shape in manifest["params"].items():
        if list(params[k].shape) != shape:
            raise ValueError(f"{path}: parameter {k} has shape {params[k].shape}, manifest says {shape}")
    config = ModelConfig.from_dict(manifest["model_config"])
    vocab = Vocabulary.from_json(manifest["vocab"])
    return BGHDE(config, embedding, params), vocab, manifest
