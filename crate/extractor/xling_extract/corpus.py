"""Parallel corpora: one UTF-8 file per language, line i aligned across files."""

from __future__ import annotations

from pathlib import Path


class AlignmentError(ValueError):
    pass


def corpus_file(corpus_dir: Path, language: str) -> Path:
    return Path(corpus_dir) / f"{language}.txt"


def read_lines(path: Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def load_corpus(corpus_dir: str | Path, languages: list[str]) -> dict[str, list[str]]:
    if not languages:
        raise AlignmentError("no languages given")
    corpus = {}
    for lang in languages:
        path = corpus_file(Path(corpus_dir), lang)
        if not path.is_file():
            raise AlignmentError(f"missing corpus file {path}")
        corpus[lang] = read_lines(path)
    counts = {lang: len(lines) for lang, lines in corpus.items()}
    if len(set(counts.values())) > 1:
        detail = ", ".join(f"{lang}={n}" for lang, n in counts.items())
        raise AlignmentError(f"alignment mismatch: line counts differ ({detail})")
    if next(iter(counts.values())) < 1:
        raise AlignmentError("corpus files are empty")
    return corpus
