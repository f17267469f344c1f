"""Stochastic blockmodel graphs and their block-level referral kernel.

Block labels use the fixed-size variant: block k receives round(pi_k * N)
nodes (remainder to the largest block), assigned contiguously.  Edges are
drawn pair-block by pair-block with a binomial count followed by a uniform
draw of distinct pair indices, so generation is exact, vectorized, and
byte-identical for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .errors import ValidationError
from .graph_core import Graph, _build_graph

__all__ = [
    "SbmSpec",
    "BlockKernel",
    "sample_sbm",
    "block_transition",
    "two_block_params",
    "two_block_spec",
]


@dataclass(frozen=True, eq=False)
class SbmSpec:
    """Block proportions, connection matrix, and population size."""

    block_probs: tuple
    psi: np.ndarray
    n: int

    def __post_init__(self):
        probs = np.asarray(self.block_probs, dtype=np.float64)
        psi = np.asarray(self.psi, dtype=np.float64)
        object.__setattr__(self, "block_probs", tuple(probs))
        object.__setattr__(self, "psi", psi)
        if probs.ndim != 1 or len(probs) == 0:
            raise ValidationError("block_probs must be a nonempty vector")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("block probabilities must be >= 0 and sum to 1")
        if psi.shape != (len(probs), len(probs)):
            raise ValidationError("psi must be K x K for K blocks")
        if not np.array_equal(psi, psi.T):
            raise ValidationError("psi must be symmetric")
        if np.any(psi < 0) or np.any(psi > 1):
            raise ValidationError("psi entries must lie in [0, 1]")
        if self.n < len(probs):
            raise ValidationError("population size must be at least K")

    @property
    def k(self) -> int:
        return len(self.block_probs)


@dataclass(frozen=True, eq=False)
class BlockKernel:
    """Row-stochastic block transition matrix and its stationary law."""

    b: np.ndarray
    block_pi: np.ndarray


def _block_sizes(spec: SbmSpec) -> np.ndarray:
    sizes = np.round(np.asarray(spec.block_probs) * spec.n).astype(np.int64)
    sizes[np.argmax(sizes)] += spec.n - sizes.sum()
    if np.any(sizes < 0):
        raise ValidationError("rounded block sizes became negative")
    return sizes


def _distinct_uniform(rng: np.random.Generator, m: int, count: int) -> np.ndarray:
    """Draw `count` distinct integers uniformly from [0, m).

    Repeated with-replacement rounds, keeping first occurrences: conditional
    on being new, each kept value is uniform over the unseen ones, so the
    result is an exact without-replacement sample.  Expected rounds are
    O(1) whenever count << m.
    """
    if count > m:
        raise ValidationError("cannot draw more distinct pairs than exist")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    collected = np.empty(0, dtype=np.int64)
    while len(collected) < count:
        batch = rng.integers(0, m, size=max(count - len(collected) + 16, 64))
        merged = np.concatenate([collected, batch])
        _, first = np.unique(merged, return_index=True)
        collected = merged[np.sort(first)]
    return collected[:count]


def _triangle_pairs(idx: np.ndarray, block: np.ndarray) -> tuple:
    """Map linear indices of unordered within-block pairs to node pairs."""
    nb = len(block)
    i_arr = np.arange(nb, dtype=np.int64)
    starts = i_arr * (2 * nb - i_arr - 1) // 2
    i = np.searchsorted(starts, idx, side="right") - 1
    j = idx - starts[i] + i + 1
    return block[i], block[j]


def sample_sbm(spec: SbmSpec, seed: int) -> tuple[Graph, np.ndarray]:
    """Draw one realization; returns (graph, block label per node).

    Isolated nodes may occur and are kept; downstream kernel construction
    rejects them, mirroring how raw network data is cleaned before analysis.
    """
    sizes = _block_sizes(spec)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    labels_by_node = np.repeat(np.arange(spec.k), sizes)
    rng = _rng.stream(seed, purpose=_rng.GRAPH)
    rows, cols = [], []
    for a in range(spec.k):
        block_a = np.arange(bounds[a], bounds[a + 1])
        for b in range(a, spec.k):
            prob = spec.psi[a, b]
            if prob == 0:
                continue
            if a == b:
                total = len(block_a) * (len(block_a) - 1) // 2
                m_edges = int(rng.binomial(total, prob)) if total else 0
                idx = _distinct_uniform(rng, total, m_edges)
                u, v = _triangle_pairs(idx, block_a)
            else:
                block_b = np.arange(bounds[b], bounds[b + 1])
                total = len(block_a) * len(block_b)
                m_edges = int(rng.binomial(total, prob)) if total else 0
                idx = _distinct_uniform(rng, total, m_edges)
                qa, qb = np.divmod(idx, len(block_b))
                u, v = block_a[qa], block_b[qb]
            rows.append(u)
            cols.append(v)
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.empty(0, dtype=np.int64)
    w = np.ones(len(r))
    g = _build_graph(r, c, w, np.arange(spec.n, dtype=np.int64))
    return g, labels_by_node


def block_transition(spec: SbmSpec) -> BlockKernel:
    """Block referral kernel B_uv = pi_v psi_uv / sum_w pi_w psi_uw.

    The stationary distribution has the closed form
    block_pi_u proportional to pi_u * sum_w pi_w psi_uw, which makes B
    reversible exactly: block_pi_u B_uv is symmetric in (u, v).
    """
    probs = np.asarray(spec.block_probs)
    row_mass = spec.psi @ probs
    if np.any(row_mass <= 0):
        bad = int(np.argmin(row_mass))
        raise ValidationError(f"block {bad} has no expected edges (zero row mass)")
    b = (spec.psi * probs[None, :]) / row_mass[:, None]
    block_pi = probs * row_mass
    block_pi = block_pi / block_pi.sum()
    return BlockKernel(b=b, block_pi=block_pi)


def two_block_params(n: int, expected_degree: float, lambda2_target: float) -> tuple:
    """Invert the balanced two-block parameterization.

    Solves {r*N + p*N/2 = expected_degree, 1/(1 + 2r/p) = lambda2} for the
    within-block excess p and the between-block rate r:

        p = 2 * deg * lambda2 / N,    r = deg * (1 - lambda2) / N.

    Within-block connection probability is p + r, between-block is r.
    """
    if not 0 < lambda2_target < 1:
        raise ValidationError("lambda2 target must lie strictly in (0, 1)")
    if expected_degree <= 0:
        raise ValidationError("expected degree must be positive")
    p = 2.0 * expected_degree * lambda2_target / n
    r = expected_degree * (1.0 - lambda2_target) / n
    if p > 1:
        raise ValidationError(
            f"infeasible: within-block excess p = {p:.6g} exceeds 1"
        )
    if p + r > 1:
        raise ValidationError(
            f"infeasible: within-block probability p + r = {p + r:.6g} exceeds 1"
        )
    if r <= 0:
        raise ValidationError("between-block rate r must be positive")
    return p, r


def two_block_spec(n: int, expected_degree: float, lambda2_target: float) -> SbmSpec:
    """Convenience wrapper: the balanced two-block SbmSpec for a target."""
    p, r = two_block_params(n, expected_degree, lambda2_target)
    psi = np.array([[p + r, r], [r, p + r]])
    return SbmSpec(block_probs=(0.5, 0.5), psi=psi, n=n)
