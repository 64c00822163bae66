"""Chain-of-thought rewrite loop and single-prompt baseline.

The CoT path attributes low regard to tokens, asks the model why those
words lower the person's social perception, then asks for a rephrasing
guided by that reason. A candidate is accepted only if it clears both
gates: scalar regard gain >= min_gain against the *original* sentence and
TF-IDF cosine similarity >= min_similarity to the *original* sentence.
Later rounds rewrite the previous candidate, but the gates never move.

Prompt templates are fixed strings shipped as data files; replay fixtures
depend on their exact wording.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .analysis import text_cosine
from .attribution import AttributionParams, attribute_tokens, low_regard_words
from .neutralize import _data_path
from .regard import RegardResult, RegardScorer

CompleteFn = Callable[[str], str]

_TEMPLATES: dict[str, str] = {}


def _template(name: str) -> str:
    if name not in _TEMPLATES:
        _TEMPLATES[name] = _data_path(f"templates/{name}.txt").read_text(encoding="utf-8")
    return _TEMPLATES[name]


@dataclass(frozen=True)
class DebiasParams:
    k: int = 5
    skip_threshold: float = 0.0
    min_gain: float = 0.05
    min_similarity: float = 0.5
    max_rounds: int = 2

    def __post_init__(self) -> None:
        if not (0.0 <= self.min_similarity <= 1.0):
            raise ValueError("min_similarity must be in [0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class DebiasResult:
    original: str
    low_words: tuple[str, ...]
    reason: str
    rewritten: str
    regard_before: RegardResult
    regard_after: RegardResult
    similarity: float
    accepted: bool
    method: str        # cot | baseline
    rounds_used: int
    skip_reason: str | None = None  # above_threshold | no_low_words


def make_reason_prompt(sentence: str, words: Sequence[str]) -> str:
    if not words:
        raise ValueError("reason prompt requires at least one word")
    return _template("reason").format(words=", ".join(words), sentence=sentence)


def make_rewrite_prompt(sentence: str, reason: str) -> str:
    if not reason:
        raise ValueError("rewrite prompt requires a non-empty reason")
    return _template("rewrite").format(reason=reason, sentence=sentence)


def make_baseline_prompt(sentence: str) -> str:
    return _template("baseline").format(sentence=sentence)


def _unrewritten(sentence: str, before: RegardResult, method: str,
                 skip_reason: str | None, rounds_used: int = 0,
                 low_words: tuple[str, ...] = ()) -> DebiasResult:
    return DebiasResult(
        original=sentence,
        low_words=low_words,
        reason="",
        rewritten=sentence,
        regard_before=before,
        regard_after=before,
        similarity=1.0,
        accepted=False,
        method=method,
        rounds_used=rounds_used,
        skip_reason=skip_reason,
    )


def _gated_loop(
    sentence: str,
    scorer: RegardScorer,
    params: DebiasParams,
    method: str,
    propose: Callable[[str, int], tuple[str, str, tuple[str, ...]] | None],
) -> DebiasResult:
    """Shared accept/reject loop. `propose(working, round)` returns
    (candidate, reason, low_words) or None when there is nothing to rewrite."""
    if not sentence:
        raise ValueError("cannot debias an empty sentence")
    before = scorer.score(sentence)
    if before.scalar >= params.skip_threshold:
        return _unrewritten(sentence, before, method, "above_threshold")

    working = sentence
    best: DebiasResult | None = None
    for round_no in range(1, params.max_rounds + 1):
        proposal = propose(working, round_no)
        if proposal is None:
            if best is None:
                return _unrewritten(sentence, before, method, "no_low_words",
                                    rounds_used=round_no - 1)
            break
        candidate, reason, words = proposal
        after = scorer.score(candidate)
        similarity = text_cosine(sentence, candidate)
        result = DebiasResult(
            original=sentence,
            low_words=words,
            reason=reason,
            rewritten=candidate,
            regard_before=before,
            regard_after=after,
            similarity=similarity,
            accepted=(after.scalar - before.scalar >= params.min_gain
                      and similarity >= params.min_similarity),
            method=method,
            rounds_used=round_no,
        )
        if result.accepted:
            return result
        if best is None or after.scalar > best.regard_after.scalar:
            best = result
        working = candidate
    assert best is not None
    return best


def debias_cot(
    sentence: str,
    llm: CompleteFn,
    scorer: RegardScorer,
    attribution: AttributionParams,
    params: DebiasParams | None = None,
) -> DebiasResult:
    """Attribute -> reason prompt -> rewrite prompt -> rescore, gated."""
    params = params or DebiasParams()

    def propose(working: str, _round: int):
        tokens = working.split()
        attribs = attribute_tokens(tokens, scorer, attribution)
        words = low_regard_words(attribs, k=params.k)
        if not words:
            return None
        reason = llm(make_reason_prompt(working, words))
        candidate = llm(make_rewrite_prompt(working, reason))
        return candidate, reason, tuple(words)

    return _gated_loop(sentence, scorer, params, "cot", propose)


def debias_baseline(
    sentence: str,
    llm: CompleteFn,
    scorer: RegardScorer,
    params: DebiasParams | None = None,
) -> DebiasResult:
    """One-shot 'regard this person more highly' prompt with the same gates."""
    params = params or DebiasParams()

    def propose(working: str, _round: int):
        return llm(make_baseline_prompt(working)), "", ()

    return _gated_loop(sentence, scorer, params, "baseline", propose)
