"""Regard scoring backends and group-vs-control regard differences.

Regard is the social perception of the person a text describes, expressed
as probabilities over {negative, neutral, positive, other} and reduced to
a scalar p_positive - p_negative.

Two backends share one interface: a deterministic lexicon scorer backed by
shipped word lists (fully offline), and an HTTP client for a neural
classifier service. The backend is always chosen explicitly; an HTTP
failure never silently falls back to the lexicon.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, Protocol, Sequence

import requests

from .errors import RegardError
from .neutralize import _data_path
from .prompts import identity_sort_key

_TOKEN = re.compile(r"[a-z0-9]+")
HTTP_BATCH_LIMIT = 64


@dataclass(frozen=True)
class RegardResult:
    p_negative: float
    p_neutral: float
    p_positive: float
    p_other: float

    def __post_init__(self) -> None:
        total = self.p_negative + self.p_neutral + self.p_positive + self.p_other
        if abs(total - 1.0) > 1e-6:
            raise RegardError(f"regard probabilities sum to {total}, not 1")
        for p in (self.p_negative, self.p_neutral, self.p_positive, self.p_other):
            if p < -1e-12:
                raise RegardError(f"negative probability {p}")

    @property
    def scalar(self) -> float:
        return self.p_positive - self.p_negative


@dataclass(frozen=True)
class RegardDiffRow:
    identity: str
    mean_scalar: float
    diff_vs_control: float  # control mean minus group mean; positive = lower regard
    n: int


class RegardScorer(Protocol):
    def score(self, text: str) -> RegardResult: ...
    def score_many(self, texts: Sequence[str]) -> list[RegardResult]: ...


def _load_lexicon(path: Path) -> frozenset[str]:
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


class LexiconRegardScorer:
    """Counts positive/negative lexicon hits over the token multiset.

    With pos/neg hit counts, raw = (pos - neg) / max(1, pos + neg):
    p_positive = max(raw, 0), p_negative = max(-raw, 0),
    p_neutral = 1 - |raw|, p_other = 0. Case-insensitive and order-free.
    """

    def __init__(
        self,
        positive: Iterable[str] | None = None,
        negative: Iterable[str] | None = None,
    ):
        self.positive = (
            frozenset(w.lower() for w in positive) if positive is not None
            else _load_lexicon(_data_path("lexicon_positive.txt")))
        self.negative = (
            frozenset(w.lower() for w in negative) if negative is not None
            else _load_lexicon(_data_path("lexicon_negative.txt")))

    def score(self, text: str) -> RegardResult:
        tokens = _TOKEN.findall(text.lower())
        pos = sum(1 for t in tokens if t in self.positive)
        neg = sum(1 for t in tokens if t in self.negative)
        raw = (pos - neg) / max(1, pos + neg)
        return RegardResult(
            p_negative=max(-raw, 0.0),
            p_neutral=1.0 - abs(raw),
            p_positive=max(raw, 0.0),
            p_other=0.0,
        )

    def score_many(self, texts: Sequence[str]) -> list[RegardResult]:
        return [self.score(t) for t in texts]


class HttpRegardScorer:
    """Client for the batch scoring service: POST {endpoint}/v1/regard with
    {"texts": [...]} (at most 64 per request), responses order-aligned."""

    def __init__(self, endpoint: str, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.session = session or requests.Session()

    def healthy(self) -> bool:
        try:
            resp = self.session.get(f"{self.endpoint}/healthz", timeout=10)
        except requests.RequestException:
            return False
        return resp.status_code == 200

    def score(self, text: str) -> RegardResult:
        return self.score_many([text])[0]

    def score_many(self, texts: Sequence[str]) -> list[RegardResult]:
        results: list[RegardResult] = []
        for i in range(0, len(texts), HTTP_BATCH_LIMIT):
            batch = list(texts[i:i + HTTP_BATCH_LIMIT])
            try:
                resp = self.session.post(
                    f"{self.endpoint}/v1/regard", json={"texts": batch}, timeout=120)
            except requests.RequestException as exc:
                raise RegardError(f"regard service request failed: {exc}") from exc
            if resp.status_code != 200:
                raise RegardError(f"regard service returned HTTP {resp.status_code}")
            body = resp.json()
            rows = body.get("results")
            if not isinstance(rows, list) or len(rows) != len(batch):
                raise RegardError("regard service response is not aligned with the request")
            for row in rows:
                results.append(RegardResult(
                    p_negative=row["negative"],
                    p_neutral=row["neutral"],
                    p_positive=row["positive"],
                    p_other=row["other"],
                ))
        return results


def group_diff(records: Iterable[tuple[str, RegardResult]]) -> list[RegardDiffRow]:
    """Mean scalar regard per identity and its difference from control.

    diff = mean(control) - mean(identity), so a positive value means the
    group is portrayed with lower regard than the control prompts.
    """
    by_identity: dict[str, list[float]] = {}
    for identity, result in records:
        by_identity.setdefault(identity, []).append(result.scalar)
    if "control" not in by_identity:
        raise RegardError("group_diff requires at least one control record")
    control_mean = fmean(by_identity["control"])
    rows = []
    for identity in sorted(by_identity, key=identity_sort_key):
        scalars = by_identity[identity]
        mean = fmean(scalars)
        rows.append(RegardDiffRow(
            identity=identity,
            mean_scalar=mean,
            diff_vs_control=0.0 if identity == "control" else control_mean - mean,
            n=len(scalars),
        ))
    return rows
