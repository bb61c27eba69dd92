"""Model checkpoints.

One .npz archive holds a JSON metadata entry (model config, vocabulary,
lexicon terms, label names, text schema) plus every named parameter array
with its shape. Loading rebuilds the model and reproduces eval logits
bit-exactly at equal precision.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import EmbeddingTable, Vocabulary
from .errors import UsageError
from .lexicon import Lexicon
from .model import ModelConfig, MoeClassifier
from .tensor import Tensor

FORMAT_VERSION = 1
_PARAM = "param/"


@dataclass
class Checkpoint:
    model: MoeClassifier
    vocab: Vocabulary
    lexicon: Lexicon
    label_names: dict[str, list[str]]  # task_id -> class index -> label string
    language: str
    text_column: str
    label_column: str


def save_checkpoint(path: str, model: MoeClassifier, vocab: Vocabulary,
                    lexicon: Lexicon, label_names: dict[str, list[str]],
                    language: str = "english", text_column: str = "text",
                    label_column: str = "label") -> str:
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    meta = {
        "version": FORMAT_VERSION,
        "config": asdict(model.cfg),
        "vocab": list(vocab.id_to_token),
        "lexicon": sorted(lexicon.terms),
        "lexicon_language": lexicon.language,
        "label_names": label_names,
        "language": language,
        "text_column": text_column,
        "label_column": label_column,
    }
    arrays = {_PARAM + name: t.data for name, t in model.named_parameters()}
    np.savez(path, meta=np.asarray(json.dumps(meta)), **arrays)
    return path


def load_checkpoint(path: str) -> Checkpoint:
    with np.load(path, allow_pickle=False) as z:
        if "meta" not in z.files:
            raise UsageError(f"{path}: not a checkpoint (no meta entry)")
        meta = json.loads(str(z["meta"][()]))
        if meta.get("version") != FORMAT_VERSION:
            raise UsageError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        arrays = {k[len(_PARAM):]: z[k] for k in z.files if k.startswith(_PARAM)}
    raw = dict(meta["config"])
    raw["classes_per_task"] = tuple(raw["classes_per_task"])
    cfg = ModelConfig(**raw)
    tokens = list(meta["vocab"])
    vocab = Vocabulary({t: i for i, t in enumerate(tokens)}, tuple(tokens))
    dtype = arrays["embedding"].dtype
    emb = EmbeddingTable(Tensor(arrays["embedding"].copy(), requires_grad=True),
                         cfg.word_dim)
    model = MoeClassifier(cfg, emb, np.random.default_rng(0), dtype=dtype)
    model.load_state_arrays(arrays)
    lexicon = Lexicon(frozenset(meta["lexicon"]), language=meta["lexicon_language"],
                      source=path)
    return Checkpoint(
        model=model,
        vocab=vocab,
        lexicon=lexicon,
        label_names={k: list(v) for k, v in meta["label_names"].items()},
        language=meta["language"],
        text_column=meta["text_column"],
        label_column=meta["label_column"],
    )
