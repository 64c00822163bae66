"""Shapley-value token attribution against a regard scorer.

The coalition value f(S) is the negative-class probability of the sentence
rebuilt from the tokens in S, so a positive attribution marks a token that
pushes the sentence toward lower regard.

Exact mode enumerates all coalitions and accumulates in rational
arithmetic (float coalition values are exact binary rationals), converting
to float once at the end. That makes efficiency and symmetry hold to
rounding and makes the result identical to any other exact enumerator.
Sampled mode averages marginal contributions over seeded uniform
permutations. Both modes memoize coalition evaluations by bitmask, so at
most 2^n scorer calls happen per sentence.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Sequence

from .regard import RegardScorer

CoalitionValue = Callable[[int], float]  # bitmask over token positions -> value


@dataclass(frozen=True)
class TokenAttribution:
    token: str
    index: int
    phi: float


@dataclass(frozen=True)
class AttributionParams:
    mode: str = "sampled"          # exact | sampled
    samples: int = 2000
    seed: int = 0
    mask_strategy: str = "delete"  # delete | mask_token
    mask_token: str = "_"
    exact_cap: int = 20

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"unknown attribution mode {self.mode!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.mask_strategy not in ("delete", "mask_token"):
            raise ValueError(f"unknown mask strategy {self.mask_strategy!r}")


class _Memo:
    def __init__(self, f: CoalitionValue):
        self.f = f
        self.cache: dict[int, float] = {}

    def __call__(self, mask: int) -> float:
        if mask not in self.cache:
            self.cache[mask] = self.f(mask)
        return self.cache[mask]


def regard_coalition_value(
    tokens: Sequence[str],
    scorer: RegardScorer,
    mask_strategy: str = "delete",
    mask_token: str = "_",
) -> CoalitionValue:
    """f(S) = p_negative of the sentence rebuilt from the kept tokens.
    The empty coalition scores the empty string."""

    def f(mask: int) -> float:
        if mask_strategy == "delete":
            kept = [t for i, t in enumerate(tokens) if mask >> i & 1]
        else:
            kept = [t if mask >> i & 1 else mask_token for i, t in enumerate(tokens)]
        return scorer.score(" ".join(kept)).p_negative

    return f


def shapley_exact(tokens: Sequence[str], f: CoalitionValue,
                  params: AttributionParams | None = None) -> list[TokenAttribution]:
    """phi_i = sum over S not containing i of
    |S|! (n-|S|-1)! / n! * (f(S+i) - f(S)), computed exactly."""
    params = params or AttributionParams(mode="exact")
    n = len(tokens)
    if n > params.exact_cap:
        raise ValueError(
            f"{n} tokens exceeds the exact-mode cap of {params.exact_cap}; "
            "use sampled mode")
    memo = _Memo(f)
    values = [Fraction(memo(mask)) for mask in range(1 << n)]
    n_fact = factorial(n)
    weights = [Fraction(factorial(s) * factorial(n - s - 1), n_fact) for s in range(n)]

    attribs = []
    for i in range(n):
        bit = 1 << i
        phi = Fraction(0)
        for mask in range(1 << n):
            if mask & bit:
                continue
            phi += weights[_popcount(mask)] * (values[mask | bit] - values[mask])
        attribs.append(TokenAttribution(token=tokens[i], index=i, phi=float(phi)))
    return attribs


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def shapley_sampled(tokens: Sequence[str], f: CoalitionValue,
                    params: AttributionParams) -> list[TokenAttribution]:
    """phi_i = mean marginal contribution over `samples` seeded uniform
    permutations. Deterministic for a fixed seed."""
    n = len(tokens)
    memo = _Memo(f)
    rng = random.Random(params.seed)
    totals = [0.0] * n
    order = list(range(n))
    for _ in range(params.samples):
        # Fisher-Yates with the stdlib Mersenne Twister; spelled out so the
        # permutation stream does not depend on random.shuffle internals.
        for i in range(n - 1, 0, -1):
            j = rng.randrange(i + 1)
            order[i], order[j] = order[j], order[i]
        mask = 0
        prev = memo(0)
        for i in order:
            mask |= 1 << i
            cur = memo(mask)
            totals[i] += cur - prev
            prev = cur
    return [
        TokenAttribution(token=tokens[i], index=i, phi=totals[i] / params.samples)
        for i in range(n)
    ]


def attribute_tokens(tokens: Sequence[str], scorer: RegardScorer,
                     params: AttributionParams) -> list[TokenAttribution]:
    f = regard_coalition_value(tokens, scorer, params.mask_strategy, params.mask_token)
    if params.mode == "exact":
        return shapley_exact(tokens, f, params)
    return shapley_sampled(tokens, f, params)


def low_regard_words(attribs: Sequence[TokenAttribution], k: int = 5) -> list[str]:
    """Up to k tokens with positive attribution toward the negative class,
    strongest first; ties broken by earlier position."""
    if not attribs:
        raise ValueError("low_regard_words requires a non-empty attribution list")
    chosen = sorted(
        (a for a in attribs if a.phi > 0),
        key=lambda a: (-a.phi, a.index),
    )
    return [a.token for a in chosen[:k]]
