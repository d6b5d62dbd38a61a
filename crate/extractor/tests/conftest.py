import zlib
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[2]
GOLDEN = REPO / "crates" / "xling" / "tests" / "data" / "toy-enc_swa.xemb"
GOLDEN_ROWS = np.array(
    [[0.6, 0.8, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.5, -0.5, 0.5, -0.5]],
    dtype=np.float32,
)


class StubEncoder:
    """Deterministic stand-in: each sentence maps to a fixed pseudo-random
    vector seeded by its CRC, so aligned lines in different files differ."""

    def __init__(self, hidden_size=8, fail_on=None):
        self.hidden_size = hidden_size
        self.fail_on = fail_on
        self.calls = 0

    def encode(self, sentences):
        self.calls += 1
        rows = []
        for s in sentences:
            if self.fail_on is not None and s == self.fail_on:
                raise RuntimeError(f"cannot tokenize {s!r}")
            rng = np.random.default_rng(zlib.crc32(s.encode("utf-8")))
            rows.append(rng.normal(size=self.hidden_size) + 0.1)
        return np.array(rows)


@pytest.fixture
def stub():
    return StubEncoder()


@pytest.fixture
def corpus(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for lang, prefix in [("swa", "sw"), ("hau", "ha"), ("yor", "yo")]:
        lines = [f"{prefix} sentence {i}" for i in range(10)]
        (d / f"{lang}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return d
