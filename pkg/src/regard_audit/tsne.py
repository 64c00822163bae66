"""Exact t-SNE (van der Maaten & Hinton 2008) for desk-scale inputs.

Everything is the plain O(N^2) algorithm: per-point Gaussian bandwidths
found by binary search against the target perplexity, symmetrized joint
probabilities with a numeric floor, Student-t low-dimensional affinities
with one degree of freedom, and momentum gradient descent with early
exaggeration. No Barnes-Hut tree, no adaptive gains: determinism and
testability over speed.

KL(P || Q) against the un-exaggerated P is logged at iteration 0, every
50 iterations, and after the final update.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EXAGGERATION_ITERS = 250
MOMENTUM_SWITCH_ITER = 250
P_FLOOR = 1e-12
PERPLEXITY_TOL = 1e-5
MAX_BISECTIONS = 50
CHECKPOINT_EVERY = 50


@dataclass(frozen=True)
class TsneParams:
    perplexity: float = 30.0
    learning_rate: float = 200.0
    iterations: int = 1000
    early_exaggeration: float = 12.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.perplexity < 2:
            raise ValueError("perplexity must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class TsneResult:
    coords: np.ndarray                      # (N, 2)
    checkpoints: list[tuple[int, float]] = field(default_factory=list)

    @property
    def initial_kl(self) -> float:
        return self.checkpoints[0][1]

    @property
    def final_kl(self) -> float:
        return self.checkpoints[-1][1]


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _row_affinities(dist_row: np.ndarray, beta: float, i: int) -> tuple[np.ndarray, float]:
    """Conditional p_{j|i} for precision beta, plus the row's perplexity."""
    p = np.exp(-dist_row * beta)
    p[i] = 0.0
    total = p.sum()
    if total <= 0.0:
        return p, 0.0
    p /= total
    nz = p > 0
    entropy = -np.sum(p[nz] * np.log(p[nz]))
    return p, float(np.exp(entropy))


def _conditional_p(dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Binary search beta_i per point until the row perplexity matches the
    target within PERPLEXITY_TOL (at most MAX_BISECTIONS halvings; the
    closest bracket endpoint is kept if the tolerance is not reached)."""
    n = dists.shape[0]
    p = np.zeros((n, n))
    for i in range(n):
        row = dists[i]
        if np.all(row[np.arange(n) != i] == 0.0):
            raise ValueError(
                "degenerate input: all rows identical, perplexity search cannot converge")
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        row_p, perp = _row_affinities(row, beta, i)
        for _ in range(MAX_BISECTIONS):
            if abs(perp - perplexity) <= PERPLEXITY_TOL:
                break
            if perp > perplexity:  # too flat: raise precision
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
            row_p, perp = _row_affinities(row, beta, i)
        p[i] = row_p
    return p


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    dists = _pairwise_sq_dists(x)
    cond = _conditional_p(dists, perplexity)
    p = (cond + cond.T) / (2.0 * x.shape[0])
    np.maximum(p, P_FLOOR, out=p)
    return p


def _q_affinities(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _pairwise_sq_dists(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    np.maximum(q, P_FLOOR, out=q)
    return q, num


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    q, _ = _q_affinities(y)
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def clamp_perplexity(perplexity: float, n: int) -> float:
    """Clamp so the effective perplexity stays below N/3."""
    return min(perplexity, (n - 1) / 3.0)


def tsne(x: np.ndarray, params: TsneParams) -> TsneResult:
    """Embed rows of x into 2-D. Deterministic for a fixed seed."""
    n = x.shape[0]
    if n < 5:
        raise ValueError(f"t-SNE needs at least 5 points, got {n}")
    perplexity = clamp_perplexity(params.perplexity, n)
    if perplexity < 2:
        raise ValueError(
            f"perplexity clamped below 2 for N={n}; need more points")

    p = joint_probabilities(np.asarray(x, dtype=np.float64), perplexity)

    rng = np.random.RandomState(params.seed)
    y = rng.randn(n, 2) * 1e-4
    velocity = np.zeros_like(y)
    checkpoints = [(0, kl_divergence(p, y))]

    for t in range(params.iterations):
        p_eff = p * params.early_exaggeration if t < EXAGGERATION_ITERS else p
        q, num = _q_affinities(y)
        weights = (p_eff - q) * num
        # grad_i = 4 * sum_j w_ij (y_i - y_j)
        grad = 4.0 * (np.diag(weights.sum(axis=1)) - weights) @ y
        momentum = (params.momentum_early if t < MOMENTUM_SWITCH_ITER
                    else params.momentum_late)
        velocity = momentum * velocity - params.learning_rate * grad
        y = y + velocity
        done = t + 1
        if done % CHECKPOINT_EVERY == 0 or done == params.iterations:
            checkpoints.append((done, kl_divergence(p, y)))

    return TsneResult(coords=y, checkpoints=checkpoints)
