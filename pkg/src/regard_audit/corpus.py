"""Load, filter, and deterministically sample biography records.

Corpus files are UTF-8 JSON lines, one object per line with fields
``id`` and ``text`` (extra fields are ignored, so the module can re-read
its own output, which adds ``sentence_count``).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CorpusError

# Naive boundary: ., ! or ? followed by whitespace and an uppercase letter.
# Abbreviations are deliberately not special-cased; a documented simple
# splitter beats an undocumented clever one for reproducibility.
_BOUNDARY = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")


def split_sentences(text: str) -> list[str]:
    """Split text at sentence boundaries; trailing unterminated text counts
    as a sentence."""
    parts = _BOUNDARY.split(text.strip())
    return [p for p in parts if p]


@dataclass(frozen=True)
class Biography:
    id: str
    text: str
    sentence_count: int = field(default=-1)

    @classmethod
    def from_text(cls, id: str, text: str) -> "Biography":
        return cls(id=id, text=text, sentence_count=len(split_sentences(text)))


@dataclass(frozen=True)
class CorpusConfig:
    min_sentences: int = 4
    max_sentences: int = 9
    sample_size: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if not (1 <= self.min_sentences <= self.max_sentences):
            raise ValueError("need 1 <= min_sentences <= max_sentences")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")


def load_corpus(path: str | Path) -> list[Biography]:
    """Read one Biography per line, preserving file order.

    Raises CorpusError naming the offending line for malformed records
    and duplicate ids.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    bios: list[Biography] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise CorpusError(f"line {lineno}: record must have fields 'id' and 'text'")
            bio_id = rec["id"]
            if not isinstance(bio_id, str) or not bio_id:
                raise CorpusError(f"line {lineno}: 'id' must be a non-empty string")
            if not isinstance(rec["text"], str):
                raise CorpusError(f"line {lineno}: 'text' must be a string")
            if bio_id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {bio_id!r}")
            seen.add(bio_id)
            bios.append(Biography.from_text(bio_id, rec["text"]))
    return bios


def write_corpus(bios: Iterable[Biography], path: str | Path) -> None:
    """Write records in the input format plus ``sentence_count``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for bio in bios:
            fh.write(json.dumps(
                {"id": bio.id, "text": bio.text, "sentence_count": bio.sentence_count},
                ensure_ascii=False) + "\n")


class _Lcg:
    """64-bit linear congruential generator (Knuth MMIX constants:
    a = 6364136223846793005, c = 1442695040888963407, m = 2**64).

    Hand-rolled so the sampled id set is reproducible from the seed in any
    language, independent of a runtime's RNG internals.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_below(self, bound: int) -> int:
        self.state = (self.state * 6364136223846793005 + 1442695040888963407) & self.MASK
        return (self.state >> 33) % bound


def filter_and_sample(bios: list[Biography], cfg: CorpusConfig) -> list[Biography]:
    """Keep bios within the sentence-count window, then take a seeded sample.

    Eligible ids are sorted lexicographically before a Fisher-Yates shuffle
    driven by the LCG above, so the selection depends only on the eligible
    id set and the seed, never on input order.
    """
    by_id = {b.id: b for b in bios}
    eligible = sorted(
        b.id for b in bios
        if cfg.min_sentences <= b.sentence_count <= cfg.max_sentences
    )
    if not eligible:
        raise CorpusError(
            f"no records with sentence_count in [{cfg.min_sentences}, {cfg.max_sentences}]")
    rng = _Lcg(cfg.seed)
    for i in range(len(eligible) - 1, 0, -1):
        j = rng.next_below(i + 1)
        eligible[i], eligible[j] = eligible[j], eligible[i]
    chosen = eligible[: min(cfg.sample_size, len(eligible))]
    return [by_id[i] for i in chosen]
