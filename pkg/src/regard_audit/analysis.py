"""Corpus metrics over generated completions: token frequencies per label,
label PMI, TF-IDF document embeddings, and group-vs-control cosine stats.

All formulas are fixed and documented here so results are reproducible:

  PMI (bits, add-alpha smoothed; V = vocabulary size, L = label count,
  T = total tokens):
      pmi(w, l) = log2( ((c(w,l) + a) * (T + a*V*L))
                      / ((c(w) + a*L) * (c(l) + a*V)) )

  TF-IDF: tf = raw count in the document, idf = ln((1+N)/(1+df)) + 1,
  rows L2-normalized, vocabulary sorted lexicographically.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .neutralize import _data_path

_TOKEN = re.compile(r"[a-z0-9]+")
_MIN_TOKEN_LEN = 2
# The anonymization mask "<PER>" survives splitting as the bare token
# "per"; it is metadata, not content, so it is always dropped.
_MASK_ARTIFACT = "per"

DocKey = tuple[str, str]  # (bio_id, identity)

_STOPWORDS: frozenset[str] | None = None


def stopwords() -> frozenset[str]:
    global _STOPWORDS
    if _STOPWORDS is None:
        _STOPWORDS = frozenset(
            w.strip() for w in
            _data_path("stopwords.txt").read_text(encoding="utf-8").splitlines()
            if w.strip()
        )
    return _STOPWORDS


def tokenize(text: str, stop: frozenset[str] | None = None) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop short tokens,
    stopwords, and the mask artifact."""
    stop = stopwords() if stop is None else stop
    return [
        t for t in _TOKEN.findall(text.lower())
        if len(t) >= _MIN_TOKEN_LEN and t not in stop and t != _MASK_ARTIFACT
    ]


@dataclass
class FrequencyTable:
    counts: dict[str, Counter]

    def top(self, label: str, n: int) -> list[tuple[str, int]]:
        """Top-n words: count descending, word ascending on ties."""
        ranked = sorted(self.counts[label].items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:n]


def frequencies(texts_by_label: Mapping[str, Sequence[str]]) -> FrequencyTable:
    if not texts_by_label:
        raise ValueError("frequencies requires at least one label")
    counts = {
        label: Counter(t for text in texts for t in tokenize(text))
        for label, texts in texts_by_label.items()
    }
    return FrequencyTable(counts=counts)


@dataclass(frozen=True)
class PmiEntry:
    word: str
    label: str
    pmi_bits: float


def pmi(
    texts_by_label: Mapping[str, Sequence[str]],
    min_count: int = 5,
    alpha: float = 1.0,
) -> list[PmiEntry]:
    """Label-association PMI for every word with total count >= min_count,
    sorted per label by pmi descending (word ascending on ties)."""
    if len(texts_by_label) < 2:
        raise ValueError("pmi requires at least two labels")
    table = frequencies(texts_by_label)
    vocab = sorted({w for c in table.counts.values() for w in c})
    labels = sorted(table.counts)
    word_totals = Counter()
    label_totals = {}
    for label in labels:
        label_totals[label] = sum(table.counts[label].values())
        word_totals.update(table.counts[label])
    total = sum(label_totals.values())
    v, l = len(vocab), len(labels)

    entries = []
    for label in labels:
        rows = []
        for word in vocab:
            if word_totals[word] < min_count:
                continue
            cwl = table.counts[label].get(word, 0)
            value = math.log2(
                ((cwl + alpha) * (total + alpha * v * l))
                / ((word_totals[word] + alpha * l) * (label_totals[label] + alpha * v))
            )
            rows.append(PmiEntry(word=word, label=label, pmi_bits=value))
        rows.sort(key=lambda e: (-e.pmi_bits, e.word))
        entries.extend(rows)
    return entries


@dataclass
class TfidfMatrix:
    vocabulary: list[str]
    rows: np.ndarray          # shape (n_docs, len(vocabulary)), L2-normalized
    doc_keys: list[DocKey]
    zero_rows: list[DocKey]   # documents with no tokens after filtering

    def row_for(self, key: DocKey) -> np.ndarray:
        return self.rows[self.doc_keys.index(key)]


def tfidf(docs: Sequence[tuple[DocKey, str]],
          stop: frozenset[str] | None = None) -> TfidfMatrix:
    if not docs:
        raise ValueError("tfidf requires at least one document")
    token_lists = [tokenize(text, stop) for _, text in docs]
    vocab = sorted({t for tokens in token_lists for t in tokens})
    index = {w: i for i, w in enumerate(vocab)}
    n = len(docs)

    df = np.zeros(len(vocab))
    for tokens in token_lists:
        for w in set(tokens):
            df[index[w]] += 1
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

    rows = np.zeros((n, len(vocab)))
    for i, tokens in enumerate(token_lists):
        for w, c in Counter(tokens).items():
            rows[i, index[w]] = c * idf[index[w]]
    norms = np.linalg.norm(rows, axis=1)
    zero = norms == 0
    rows[~zero] /= norms[~zero, None]

    keys = [key for key, _ in docs]
    return TfidfMatrix(
        vocabulary=vocab,
        rows=rows,
        doc_keys=keys,
        zero_rows=[k for k, z in zip(keys, zero) if z],
    )


def pair_cosine(matrix: TfidfMatrix, a: DocKey, b: DocKey) -> float:
    return float(matrix.row_for(a) @ matrix.row_for(b))


def text_cosine(a: str, b: str) -> float:
    """TF-IDF cosine between two texts embedded together as a 2-doc corpus.

    Function words are kept: this is the rewrite-similarity gate, and a
    meaning-preserving rewrite keeps the sentence scaffolding, not just the
    content words.
    """
    m = tfidf([(("a", "a"), a), (("b", "b"), b)], stop=frozenset())
    return float(m.rows[0] @ m.rows[1])


def tsne_embed(matrix: TfidfMatrix, params) -> list[tuple[DocKey, float, float]]:
    """2-D embedding of the TF-IDF rows, keyed by document."""
    from .tsne import tsne
    result = tsne(matrix.rows, params)
    return [(key, float(x), float(y))
            for key, (x, y) in zip(matrix.doc_keys, result.coords)]


@dataclass(frozen=True)
class SimilarityStat:
    identity: str
    mean_cosine: float
    n: int
    skipped: int = 0


def mean_group_cosine(
    matrix: TfidfMatrix, control_label: str = "control"
) -> list[SimilarityStat]:
    """Per identity, the mean cosine between each bio's row and the same
    bio's control row. Bios missing either side are skipped and counted."""
    by_key = {key: i for i, key in enumerate(matrix.doc_keys)}
    identities = sorted({ident for _, ident in matrix.doc_keys if ident != control_label})
    stats = []
    for identity in identities:
        cosines = []
        skipped = 0
        bios = [bio for bio, ident in matrix.doc_keys if ident == identity]
        for bio in bios:
            control_key = (bio, control_label)
            if control_key not in by_key:
                skipped += 1
                continue
            cosines.append(float(
                matrix.rows[by_key[(bio, identity)]] @ matrix.rows[by_key[control_key]]))
        if not cosines:
            raise ValueError(f"no pairable control rows for identity {identity!r}")
        stats.append(SimilarityStat(
            identity=identity,
            mean_cosine=float(np.mean(cosines)),
            n=len(cosines),
            skipped=skipped,
        ))
    return stats
