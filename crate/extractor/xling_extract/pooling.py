"""Masked mean pooling over final-layer token vectors."""

from __future__ import annotations

import numpy as np


def mean_pool(
    hidden: np.ndarray,
    attention_mask: np.ndarray,
    special_tokens_mask: np.ndarray | None = None,
    include_special: bool = True,
) -> np.ndarray:
    """Averages ``hidden[b, t]`` over positions with ``attention_mask == 1``.

    Padding never contributes. Special tokens (sequence start/end) are kept
    unless ``include_special`` is false, in which case ``special_tokens_mask``
    is required.
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    mask = np.asarray(attention_mask, dtype=np.float64)
    if hidden.ndim != 3 or mask.shape != hidden.shape[:2]:
        raise ValueError(f"hidden {hidden.shape} and mask {mask.shape} disagree")
    if not include_special:
        if special_tokens_mask is None:
            raise ValueError("excluding special tokens needs special_tokens_mask")
        mask = mask * (1.0 - np.asarray(special_tokens_mask, dtype=np.float64))
    counts = mask.sum(axis=1, keepdims=True)
    empty = np.flatnonzero(counts[:, 0] == 0)
    if empty.size:
        raise ValueError(f"sequence {empty[0]} has no tokens to pool")
    return (hidden * mask[:, :, None]).sum(axis=1) / counts


def l2_normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    zero = np.flatnonzero(norms[:, 0] == 0)
    if zero.size:
        raise ValueError(f"zero-norm row {zero[0]}")
    return x / norms
