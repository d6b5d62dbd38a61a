"""``xling-extract extract|verify``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import AlignmentError
from .extract import ExtractionError, ExtractionJob, extract, huggingface_encoder
from .verify import verify_alignment


def load_encoder(job: ExtractionJob):
    return huggingface_encoder(job)


def _langs(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xling-extract")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="encode parallel corpora into .xemb files")
    ex.add_argument("--model", required=True, help="hub identifier or local path")
    ex.add_argument("--corpus-dir", required=True, type=Path, help="directory of <lang>.txt files")
    ex.add_argument("--langs", required=True, type=_langs, help="comma-separated language codes")
    ex.add_argument("--out", required=True, type=Path)
    ex.add_argument("--batch", type=int, default=32)
    ex.add_argument("--max-len", type=int, default=128)
    special = ex.add_mutually_exclusive_group()
    special.add_argument("--include-special", dest="include_special", action="store_true", default=True)
    special.add_argument("--exclude-special", dest="include_special", action="store_false")

    ve = sub.add_parser("verify", help="check N, d and norms of a model's files")
    ve.add_argument("model_dir", type=Path)
    ve.add_argument("--langs", type=_langs, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        report = verify_alignment(args.model_dir, args.langs)
        print("\n".join(report.lines()))
        return 0 if report.ok else 1
    try:
        job = ExtractionJob(
            model=args.model,
            languages=tuple(args.langs),
            corpus_dir=args.corpus_dir,
            out_dir=args.out,
            batch_size=args.batch,
            max_length=args.max_len,
            include_special=args.include_special,
        )
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        written = extract(job, encoder_factory=load_encoder)
    except (AlignmentError, ExtractionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for lang, path in written.items():
        print(f"{lang}: {path}")
    report = verify_alignment(next(iter(written.values())).parent, list(written))
    print("\n".join(report.lines()))
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
