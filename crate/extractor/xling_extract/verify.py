"""Checks that a model's files share N and d and prints their checksums."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .xemb import EXTENSION, XembError, read_xemb


@dataclass
class AlignmentReport:
    checksums: dict[str, int] = field(default_factory=dict)
    shape: tuple[int, int] | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = [f"{name} crc32={crc:08x}" for name, crc in sorted(self.checksums.items())]
        out += [f"FAIL {f}" for f in self.failures]
        out.append("OK" if self.ok else f"FAILED ({len(self.failures)} problem(s))")
        return out


def verify_alignment(model_dir: str | Path, languages: list[str] | None = None) -> AlignmentReport:
    model_dir = Path(model_dir)
    report = AlignmentReport()
    if languages:
        paths = [model_dir / f"{lang}.{EXTENSION}" for lang in languages]
    else:
        paths = sorted(model_dir.glob(f"*.{EXTENSION}")) if model_dir.is_dir() else []
    if not paths:
        report.failures.append(f"no .{EXTENSION} files in {model_dir}")
        return report
    for path in paths:
        if not path.is_file():
            report.failures.append(f"{path}: missing")
            continue
        try:
            f = read_xemb(path)
        except XembError as e:
            report.failures.append(str(e))
            continue
        report.checksums[path.name] = f.checksum
        if not f.normalized:
            report.failures.append(f"{path}: rows are not unit-norm")
        shape = f.embeddings.shape
        if report.shape is None:
            report.shape = shape
        elif shape != report.shape:
            report.failures.append(f"{path}: shape {shape[0]}x{shape[1]} differs from {report.shape[0]}x{report.shape[1]}")
    return report
