"""Sentence-embedding extraction for the xling toolkit."""

from .corpus import AlignmentError, load_corpus
from .extract import ExtractionError, ExtractionJob, extract
from .pooling import l2_normalize, mean_pool
from .verify import verify_alignment
from .xemb import XembError, read_xemb, write_xemb

__all__ = [
    "AlignmentError",
    "ExtractionError",
    "ExtractionJob",
    "XembError",
    "extract",
    "l2_normalize",
    "load_corpus",
    "mean_pool",
    "read_xemb",
    "verify_alignment",
    "write_xemb",
]
