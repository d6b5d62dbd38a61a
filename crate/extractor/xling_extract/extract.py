"""Encode aligned corpora and write one XEMB file per language."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .corpus import load_corpus
from .pooling import l2_normalize, mean_pool
from .xemb import default_path, write_xemb


class ExtractionError(RuntimeError):
    pass


class Encoder(Protocol):
    hidden_size: int

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        """Returns one pooled, un-normalized vector per sentence."""


@dataclass(frozen=True)
class ExtractionJob:
    model: str
    languages: tuple[str, ...]
    corpus_dir: Path
    out_dir: Path
    batch_size: int = 32
    max_length: int = 128
    include_special: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.max_length < 1:
            raise ValueError("batch size and max length must be positive")


class HuggingFaceEncoder:
    """Final-layer masked mean pooling with a transformers encoder, in eval
    mode with gradients off so repeated runs give identical rows."""

    def __init__(self, model: str, max_length: int = 128, include_special: bool = True):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        torch.use_deterministic_algorithms(True, warn_only=True)
        self.tokenizer = AutoTokenizer.from_pretrained(model)
        self.model = AutoModel.from_pretrained(model).eval()
        self.hidden_size = int(self.model.config.hidden_size)
        self.max_length = max_length
        self.include_special = include_special

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        batch = self.tokenizer(
            list(sentences),
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
            return_special_tokens_mask=True,
        )
        special = batch.pop("special_tokens_mask").numpy()
        with self._torch.no_grad():
            hidden = self.model(**batch).last_hidden_state.numpy()
        return mean_pool(hidden, batch["attention_mask"].numpy(), special, self.include_special)


def encode_language(encoder: Encoder, sentences: list[str], batch_size: int) -> np.ndarray:
    rows = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start : start + batch_size]
        try:
            pooled = np.asarray(encoder.encode(chunk), dtype=np.float64)
        except Exception as e:
            # Re-encode one by one to name the offending line.
            for offset, sentence in enumerate(chunk):
                try:
                    encoder.encode([sentence])
                except Exception as inner:
                    raise ExtractionError(f"encoding failed at line {start + offset + 1}: {inner}") from inner
            raise ExtractionError(f"encoding failed in lines {start + 1}-{start + len(chunk)}: {e}") from e
        if pooled.shape != (len(chunk), encoder.hidden_size):
            raise ExtractionError(
                f"encoder returned shape {pooled.shape} for lines {start + 1}-{start + len(chunk)}, "
                f"expected ({len(chunk)}, {encoder.hidden_size})"
            )
        rows.append(pooled)
    return l2_normalize(np.concatenate(rows)).astype(np.float32)


def huggingface_encoder(job: ExtractionJob) -> Encoder:
    return HuggingFaceEncoder(job.model, job.max_length, job.include_special)


def extract(
    job: ExtractionJob,
    encoder: Encoder | None = None,
    encoder_factory: Callable[[ExtractionJob], Encoder] = huggingface_encoder,
) -> dict[str, Path]:
    """Writes ``<out>/<model>/<lang>.xemb`` for every language in the job.
    The corpus is checked before any encoder is built."""
    corpus = load_corpus(job.corpus_dir, list(job.languages))
    if encoder is None:
        encoder = encoder_factory(job)
    written = {}
    for lang in sorted(corpus):
        embeddings = encode_language(encoder, corpus[lang], job.batch_size)
        written[lang] = write_xemb(default_path(job.out_dir, job.model, lang), job.model, lang, embeddings)
    return written
