"""Reader and writer for XEMB embedding files.

Layout, all integers little-endian::

    b"XEMB" | version u16 | flags u16 | n u32 | d u32
    | model_len u16 | model utf-8 | lang_len u16 | lang utf-8
    | n*d float32 little-endian, row-major | crc32(payload) u32

Flag bit 0 marks every row as unit-norm within ``NORM_TOLERANCE``.
"""

from __future__ import annotations

import os
import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"XEMB"
VERSION = 1
FLAG_NORMALIZED = 1
EXTENSION = "xemb"
NORM_TOLERANCE = 1e-4

_FIXED = struct.Struct("<4sHHII")
_LANG = re.compile(r"^[a-z]{3}$")


class XembError(ValueError):
    """A file does not follow the XEMB layout."""


@dataclass(frozen=True)
class XembFile:
    model_id: str
    language: str
    normalized: bool
    embeddings: np.ndarray
    checksum: int


def _text(value: str, what: str) -> bytes:
    raw = value.encode("utf-8")
    if not raw or len(raw) > 0xFFFF:
        raise XembError(f"{what} must be 1..65535 bytes, got {len(raw)}")
    return struct.pack("<H", len(raw)) + raw


def encode(model_id: str, language: str, embeddings: np.ndarray) -> bytes:
    """Serializes a float32 ``n x d`` matrix. The normalized flag is set iff
    every row is unit-norm within tolerance."""
    if not _LANG.match(language):
        raise XembError(f"language must be a 3-letter lowercase code, got {language!r}")
    m = np.asarray(embeddings)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise XembError(f"embeddings must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise XembError("embeddings contain non-finite values")
    m = np.ascontiguousarray(m, dtype="<f4")
    norms = np.sqrt(np.sum(m.astype(np.float64) ** 2, axis=1))
    flags = FLAG_NORMALIZED if np.all(np.abs(norms - 1.0) <= NORM_TOLERANCE) else 0
    payload = m.tobytes(order="C")
    return b"".join(
        [
            _FIXED.pack(MAGIC, VERSION, flags, m.shape[0], m.shape[1]),
            _text(model_id, "model id"),
            _text(language, "language"),
            payload,
            struct.pack("<I", zlib.crc32(payload)),
        ]
    )


def write_xemb(path: str | os.PathLike, model_id: str, language: str, embeddings: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode(model_id, language, embeddings)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path


def decode(data: bytes, name: str = "<bytes>") -> XembFile:
    if len(data) < _FIXED.size or data[:4] != MAGIC:
        raise XembError(f"{name}: unrecognized format")
    _, version, flags, n, d = _FIXED.unpack_from(data)
    if version != VERSION:
        raise XembError(f"{name}: unsupported version {version}")
    pos = _FIXED.size
    texts = []
    for what in ("model id", "language"):
        if pos + 2 > len(data):
            raise XembError(f"{name}: truncated payload ({what} length)")
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + length > len(data):
            raise XembError(f"{name}: truncated payload ({what})")
        texts.append(data[pos : pos + length].decode("utf-8"))
        pos += length
    size = 4 * n * d
    if pos + size + 4 > len(data):
        raise XembError(f"{name}: truncated payload (need {size + 4} bytes after header)")
    if pos + size + 4 < len(data):
        raise XembError(f"{name}: {len(data) - pos - size - 4} trailing bytes")
    payload = data[pos : pos + size]
    (stored,) = struct.unpack_from("<I", data, pos + size)
    computed = zlib.crc32(payload)
    if stored != computed:
        raise XembError(f"{name}: checksum mismatch (stored {stored:08x}, computed {computed:08x})")
    m = np.frombuffer(payload, dtype="<f4").reshape(n, d).astype(np.float32)
    if not np.all(np.isfinite(m)):
        raise XembError(f"{name}: non-finite entry")
    normalized = bool(flags & FLAG_NORMALIZED)
    if normalized:
        norms = np.sqrt(np.sum(m.astype(np.float64) ** 2, axis=1))
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        if bad.size:
            raise XembError(f"{name}: row {bad[0]} has norm {norms[bad[0]]:.6f} but the file is flagged normalized")
    return XembFile(texts[0], texts[1], normalized, m, stored)


def read_xemb(path: str | os.PathLike) -> XembFile:
    path = Path(path)
    return decode(path.read_bytes(), str(path))


def default_path(out_dir: str | os.PathLike, model_id: str, language: str) -> Path:
    """``<out>/<model>/<lang>.xemb``; slashes in hub ids become ``__``."""
    return Path(out_dir) / model_id.replace("/", "__") / f"{language}.{EXTENSION}"
