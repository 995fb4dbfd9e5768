"""Seeded synthetic trajectory generators on the simplex.

Each generator returns the exact model distributions (never empirical
estimates) as an ``(N, K)`` float64 array. All randomness flows through
``numpy.random.Generator`` seeded with PCG64, so a fixed seed yields a
bit-identical sequence; instances own their RNG, so distinct seeds may
run in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .prob import require_valid

_CHUNK_ROWS = 256


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic transition matrix plus an initial distribution.

    ``transition[i, j]`` is the probability that word j follows word i.
    """

    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=np.float64)
        init = np.asarray(self.initial, dtype=np.float64).ravel()
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError(f"transition must be square, got {t.shape}")
        if init.shape[0] != t.shape[0]:
            raise ValueError("initial distribution length must match matrix size")
        require_valid(t)
        require_valid(init)
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "initial", init)
        t.setflags(write=False)
        init.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


def gen_markov(chain: MarkovChain, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample a word path and emit the exact per-step next-word rows.

    Word 0 is drawn from the initial distribution and word t+1 from the
    transition row of word t. Emitted row t is the transition row of
    word t (the exact distribution the next word was drawn from).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(chain.transition, axis=1)
    cdf[:, -1] = 1.0
    init_cdf = np.cumsum(chain.initial)
    init_cdf[-1] = 1.0

    words = np.empty(n, dtype=np.int64)
    u = rng.random(n)
    words[0] = np.searchsorted(init_cdf, u[0], side="right")
    for t in range(1, n):
        words[t] = np.searchsorted(cdf[words[t - 1]], u[t], side="right")
    rows = chain.transition[words].copy()
    return rows, words


@dataclass(frozen=True)
class DirichletSpec:
    """Concentration vector of a Dirichlet distribution (all entries > 0)."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=np.float64).ravel()
        if a.size < 2 or np.any(a <= 0):
            raise ValueError("alpha must have length >= 2 with all entries > 0")
        object.__setattr__(self, "alpha", a)
        a.setflags(write=False)

    @classmethod
    def symmetric(cls, k: int, total_concentration: float) -> "DirichletSpec":
        """All K entries equal, summing to ``total_concentration``."""
        return cls(np.full(k, total_concentration / k))

    @property
    def dim(self) -> int:
        return self.alpha.size


def gen_dirichlet_iid(
    spec: DirichletSpec, n: int, seed: int, return_stats: bool = False
):
    """Independent draws via gamma normalization.

    Entries with very small concentration legitimately underflow to
    exactly zero in double precision (their true values are below the
    smallest representable float); that leaves the distribution of the
    normalized row intact. A row whose gamma draws are all zero is
    resampled, and the count of such resamples is reported through
    ``return_stats``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    k = spec.dim
    out = np.empty((n, k))
    resampled = 0
    chunk = max(1, min(_CHUNK_ROWS, int(2e7 // k) or 1))
    for i0 in range(0, n, chunk):
        i1 = min(i0 + chunk, n)
        g = rng.gamma(spec.alpha, size=(i1 - i0, k))
        sums = g.sum(axis=1)
        for j in np.nonzero(sums == 0)[0]:
            while sums[j] == 0:
                g[j] = rng.gamma(spec.alpha)
                sums[j] = g[j].sum()
                resampled += 1
        out[i0:i1] = g / sums[:, None]
    if return_stats:
        return out, {"rows_resampled": resampled}
    return out


def gen_uniform_sphere_noise(k: int, n: int, seed: int) -> np.ndarray:
    """White noise drawn uniformly on the positive orthant in sqrt coordinates.

    Per step: draw K standard normals g, fold to the positive orthant
    and normalize, s = |g| / ||g||; the emitted row is s squared, which
    sums to one by construction.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, k))
    chunk = max(1, min(1024, int(2e7 // k) or 1))
    for i0 in range(0, n, chunk):
        i1 = min(i0 + chunk, n)
        g = rng.standard_normal((i1 - i0, k))
        s = np.abs(g)
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        out[i0:i1] = s * s
    return out


@dataclass(frozen=True)
class GrowthNetConfig:
    """Preferential-attachment growth settings.

    ``kappa`` absent gives the standard rich-get-richer process; with
    ``kappa`` in (0, 1] attachment is restricted to the
    ``ceil(kappa * born)`` lowest-degree born nodes (anti-preferential
    truncation). ``total_nodes`` fixes the row width including slots
    for nodes never born; it defaults to ``m0 + n_steps``.
    """

    n_steps: int
    m0: int = 1
    m: int = 1
    kappa: float | None = None
    total_nodes: int | None = None

    def __post_init__(self):
        if self.n_steps < 1 or self.m0 < 1 or self.m < 1:
            raise ValueError("n_steps, m0 and m must all be >= 1")
        if self.kappa is not None and not (0.0 < self.kappa <= 1.0):
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.total_nodes is None:
            object.__setattr__(self, "total_nodes", self.m0 + self.n_steps)
        if self.total_nodes < self.m0 + self.n_steps:
            raise ValueError(
                f"total_nodes {self.total_nodes} cannot hold "
                f"{self.m0 + self.n_steps} born nodes"
            )
        if self.m > self.m0 + self.n_steps - 1:
            raise ValueError("m exceeds the number of candidate nodes at every step")


@dataclass
class GrowthNetState:
    """Degree bookkeeping: one slot per node, plus how many are born."""

    degrees: np.ndarray
    born: int

    @property
    def total_degree(self) -> int:
        return int(self.degrees.sum())


def gen_growth_net(
    config: GrowthNetConfig, seed: int
) -> tuple[np.ndarray, GrowthNetState]:
    """Grow the network, emitting the attachment distribution per step.

    Row t is the probability over all node slots of receiving the step-t
    arrival's connection, before that arrival joins: proportional to
    current degree over the admissible set, zero elsewhere (in
    particular on every unborn node). When the admissible set carries
    zero total degree (the single-seed start), attachment over it is
    uniform. The m connections of one arrival are sampled without
    replacement. Starts: a single seed node has no edges; m0 > 1 seeds
    are wired in a ring.
    """
    k_total = config.total_nodes
    deg = np.zeros(k_total, dtype=np.int64)
    born = config.m0
    if config.m0 == 2:
        deg[:2] = 1  # a two-node ring collapses to one edge
    elif config.m0 > 2:
        deg[: config.m0] = 2
    rng = np.random.default_rng(seed)
    rows = np.zeros((config.n_steps, k_total))

    for t in range(config.n_steps):
        if config.kappa is None:
            candidates = np.arange(born)
        else:
            size = max(1, math.ceil(config.kappa * born))
            if size >= born:
                candidates = np.arange(born)
            else:
                # lowest degrees first, ties broken by smaller node index
                order = np.lexsort((np.arange(born), deg[:born]))
                candidates = order[:size]
        weights = deg[candidates].astype(np.float64)
        total = weights.sum()
        if total == 0.0:
            probs = np.full(candidates.size, 1.0 / candidates.size)
        else:
            probs = weights / total
        rows[t, candidates] = probs

        n_draw = min(config.m, candidates.size)
        targets = _sample_without_replacement(candidates, probs, n_draw, rng)
        newcomer = born
        deg[targets] += 1
        deg[newcomer] += n_draw
        born += 1

    return rows, GrowthNetState(degrees=deg, born=born)


def _sample_without_replacement(
    items: np.ndarray, probs: np.ndarray, n_draw: int, rng: np.random.Generator
) -> np.ndarray:
    picked = np.empty(n_draw, dtype=np.int64)
    avail = items
    p = probs
    for i in range(n_draw):
        cdf = np.cumsum(p)
        j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        j = min(j, avail.size - 1)
        picked[i] = avail[j]
        if i + 1 < n_draw:
            avail = np.delete(avail, j)
            p = np.delete(p, j)
    return picked
