"""Exact checks of the metric behavior of first-word marginalization.

A terminated-sequence ("closed text") process over a vocabulary with an
absorbing end token assigns each closed text ``[w_1 .. w_n, END]`` the
probability ``p_init(w_1) * A[w_1, w_2] * ... * A[w_n, END]``.  The
first-word marginal of that text distribution is ``p_init`` itself, and
marginalization can only shrink Fisher-Rao distances, so the distortion
rate

    r = d_FR(text distributions) / d_FR(first-word marginals)

is at least 1.  For two processes sharing one transition matrix, r = 1
exactly; for two different matrices with a common exit rate ``rho`` to
the end token, r tends to at most ``rho ** -0.5`` as the marginals
approach each other (provided every row of the two matrices differs by
no more than the marginals do).

The Bhattacharyya coefficient between two closed-text distributions has
a closed form.  Writing G[i, j] = sqrt(A[i, j] * B[i, j]) over non-end
states, u_w = sqrt(p_init_a(w) * p_init_b(w)), e_w = sqrt(A[w, end] *
B[w, end]) and h_1 = sqrt(p_init_a(end) * p_init_b(end)), the
contribution of texts with n words is u . G^(n-1) . e, and summing the
geometric series gives

    coefficient = h_1 + u . (I - G)^(-1) . e.

G's spectral radius is at most 1 - rho by Cauchy-Schwarz, so the
resolvent exists.  A brute-force enumeration over all closed texts up
to a length cap provides an independent oracle with a geometric tail
bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .metrics import fisher_rao
from .prob import require_valid


class AbsorbingPairError(ValueError):
    """The matrix pair violates the absorbing-process preconditions."""


@dataclass(frozen=True)
class AbsorbingMarkovPair:
    """Two transition matrices over one vocabulary whose last index is
    an absorbing end token, with a shared exit probability ``rho``.

    Both matrices are row-stochastic; the end row is absorbing
    (``A[end, end] = 1``) and every other row exits to the end token
    with probability exactly ``rho``.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    rho: float
    p_init_a: np.ndarray
    p_init_b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=np.float64)
        b = np.asarray(self.b_matrix, dtype=np.float64)
        pa = np.asarray(self.p_init_a, dtype=np.float64).ravel()
        pb = np.asarray(self.p_init_b, dtype=np.float64).ravel()
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise AbsorbingPairError(f"matrices must be square and congruent, got {a.shape}, {b.shape}")
        k = a.shape[0]
        if k < 2:
            raise AbsorbingPairError("need at least one word besides the end token")
        if pa.shape[0] != k or pb.shape[0] != k:
            raise AbsorbingPairError("initial distributions must match the vocabulary size")
        if not (0.0 < self.rho < 1.0):
            raise AbsorbingPairError(f"rho must lie in (0, 1), got {self.rho}")
        require_valid(a)
        require_valid(b)
        require_valid(pa)
        require_valid(pb)
        end = k - 1
        for name, mat in (("A", a), ("B", b)):
            if mat[end, end] != 1.0 or np.any(mat[end, :end] != 0.0):
                raise AbsorbingPairError(f"{name} end row is not absorbing")
            if not np.allclose(mat[:end, end], self.rho, rtol=0, atol=1e-12):
                raise AbsorbingPairError(
                    f"{name} exit column must equal rho={self.rho} for every word"
                )
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_matrix", b)
        object.__setattr__(self, "p_init_a", pa)
        object.__setattr__(self, "p_init_b", pb)
        for arr in (a, b, pa, pb):
            arr.setflags(write=False)

    @property
    def n_words(self) -> int:
        """Vocabulary size excluding the end token."""
        return self.a_matrix.shape[0] - 1

    @property
    def end(self) -> int:
        return self.a_matrix.shape[0] - 1

    @property
    def same_matrix(self) -> bool:
        return np.array_equal(self.a_matrix, self.b_matrix)

    def row_divergences(self) -> np.ndarray:
        """Fisher-Rao distance between matching non-end rows of A and B."""
        end = self.end
        overlap = np.sqrt(self.a_matrix[:end] * self.b_matrix[:end]).sum(axis=1)
        return 2.0 * np.arccos(np.clip(overlap, 0.0, 1.0))


@dataclass(frozen=True)
class DistortionReport:
    """Measured distortion of one pair, with its theoretical bound."""

    d_x: float
    d_p: float
    ratio: float
    bound: float
    method: str  # "resolvent" or "enumeration"
    row_condition_ok: bool
    truncation_length: int | None = None
    tail_bound: float | None = None


def cos_half_dfr_x(pair: AbsorbingMarkovPair) -> float:
    """Bhattacharyya coefficient of the two closed-text distributions.

    Closed form via the resolvent: ``h1 + u (I - G)^{-1} e`` with the
    blocks defined in the module docstring. Raises when ``I - G`` is
    singular (absorption violated).
    """
    end = pair.end
    g = np.sqrt(pair.a_matrix[:end, :end] * pair.b_matrix[:end, :end])
    u = np.sqrt(pair.p_init_a[:end] * pair.p_init_b[:end])
    e = np.sqrt(pair.a_matrix[:end, end] * pair.b_matrix[:end, end])
    h1 = float(np.sqrt(pair.p_init_a[end] * pair.p_init_b[end]))
    try:
        x = np.linalg.solve(np.eye(end) - g, e)
    except np.linalg.LinAlgError as exc:
        raise AbsorbingPairError(f"I - G is singular: {exc}") from exc
    return float(h1 + u @ x)


def enumerate_closed_texts(
    pair: AbsorbingMarkovPair, max_len: int, budget: int = 2**24
) -> tuple[float, float]:
    """Brute-force partial Bhattacharyya sum over closed texts up to
    ``max_len`` words-plus-end, with a geometric bound on the omitted tail.

    Every text's contribution ``sqrt(x_a(text) * x_b(text))`` is
    materialized individually (vectorized over same-length prefixes),
    making this an oracle independent of the resolvent path. The text
    count grows as ``n_words ** max_len``; calls beyond ``budget``
    enumerated prefixes are refused.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    k = pair.n_words
    total_prefixes = sum(k**j for j in range(max_len))
    if total_prefixes > budget:
        raise ValueError(
            f"enumeration of {total_prefixes} prefixes exceeds budget {budget}"
        )
    end = pair.end
    sq_step = np.sqrt(pair.a_matrix[:end, :end] * pair.b_matrix[:end, :end])
    sq_exit = np.sqrt(pair.a_matrix[:end, end] * pair.b_matrix[:end, end])

    # Length-0 prefix: the text [END] alone.
    partial = float(np.sqrt(pair.p_init_a[end] * pair.p_init_b[end]))
    vals = np.sqrt(pair.p_init_a[:end] * pair.p_init_b[:end])  # value per prefix
    last = np.arange(k)  # last word of each prefix
    for j in range(1, max_len):
        partial += float((vals * sq_exit[last]).sum())
        if j < max_len - 1:
            vals = (vals[:, None] * sq_step[last, :]).ravel()
            last = np.tile(np.arange(k), last.size)

    ea = pair.p_init_a[end]
    eb = pair.p_init_b[end]
    tail = float(np.sqrt((1.0 - ea) * (1.0 - eb)) * (1.0 - pair.rho) ** (max_len - 1))
    return partial, tail


def distortion_rate(
    pair: AbsorbingMarkovPair, method: str = "resolvent", max_len: int = 10
) -> DistortionReport:
    """Distortion of the Fisher-Rao distance under first-word marginalization.

    ``d_p`` is the distance between the initial (first-word) marginal
    distributions; ``d_x`` between the full closed-text distributions.
    Raises when the marginals coincide (the ratio is then undefined).
    The report also flags whether every pair of matching rows of A and
    B is at most ``d_p`` apart, the hypothesis under which the
    ``rho ** -0.5`` limit bound applies; violating it does not abort.
    """
    d_p = fisher_rao(pair.p_init_a, pair.p_init_b)
    if d_p == 0.0:
        raise AbsorbingPairError("initial distributions coincide; distortion undefined")
    trunc = None
    tail = None
    if method == "resolvent":
        coeff = cos_half_dfr_x(pair)
    elif method == "enumeration":
        coeff, tail = enumerate_closed_texts(pair, max_len)
        trunc = max_len
    else:
        raise ValueError(f"unknown method {method!r}")
    d_x = float(2.0 * np.arccos(np.clip(coeff, 0.0, 1.0)))
    row_ok = bool((pair.row_divergences() <= d_p + 1e-12).all())
    return DistortionReport(
        d_x=d_x,
        d_p=d_p,
        ratio=d_x / d_p,
        bound=float(pair.rho**-0.5),
        method=method,
        row_condition_ok=row_ok,
        truncation_length=trunc,
        tail_bound=tail,
    )


def random_absorbing_pair(
    rng: np.random.Generator,
    n_words: int,
    rho: float,
    same_matrix: bool = False,
    min_separation: float = 1e-3,
) -> AbsorbingMarkovPair:
    """Random valid pair with entries bounded away from zero.

    Initial distributions are redrawn until their Fisher-Rao distance
    exceeds ``min_separation`` so the distortion ratio is well posed.
    A single-word vocabulary admits only one initial distribution (the
    end mass is pinned to rho), so at least two words are required.
    """
    if n_words < 2:
        raise ValueError("need n_words >= 2 to draw distinct initial distributions")
    size = n_words + 1

    def block() -> np.ndarray:
        mat = np.zeros((size, size))
        r = rng.random((n_words, n_words)) + 0.05
        r *= (1.0 - rho) / r.sum(axis=1, keepdims=True)
        mat[:n_words, :n_words] = r
        mat[:n_words, n_words] = rho
        mat[n_words, n_words] = 1.0
        return mat

    def init() -> np.ndarray:
        v = rng.random(n_words) + 0.05
        v *= (1.0 - rho) / v.sum()
        return np.concatenate([v, [rho]])

    a = block()
    b = a.copy() if same_matrix else block()
    pa = init()
    for _ in range(1000):
        pb = init()
        if fisher_rao(pa, pb) > min_separation:
            break
    else:
        raise AbsorbingPairError(
            f"could not draw initials separated by {min_separation} in 1000 tries"
        )
    return AbsorbingMarkovPair(a_matrix=a, b_matrix=b, rho=rho, p_init_a=pa, p_init_b=pb)


@dataclass(frozen=True)
class LimitProbe:
    """Distortion ratios along a family of shrinking perturbations."""

    rho: float
    deltas: np.ndarray
    ratios: np.ndarray
    bound: float
    monotone_decreasing: bool
    row_condition_ok: bool

    @property
    def final_ratio(self) -> float:
        return float(self.ratios[-1])


def probe_distortion_limit(
    rho: float,
    n_words: int = 5,
    delta0: float = 0.2,
    n_halvings: int = 8,
    seed: int = 0,
) -> LimitProbe:
    """Drive two absorbing processes together and watch the distortion.

    A base process is perturbed along fixed random zero-sum directions:
    the initial distribution by ``delta`` and every non-end matrix row
    by ``theta * delta``, with ``theta`` shrunk (deterministically)
    until each row divergence stays at or below the marginal distance at
    every level, keeping the limit theorem's hypotheses in force.
    ``delta`` is then halved ``n_halvings`` times and the distortion
    ratio recorded at each level; the last ratio approximates the limit,
    which the theorem bounds by ``rho ** -0.5``. Monotonicity of the
    ratio sequence is reported as a diagnostic, not asserted.
    """
    rng = np.random.default_rng(seed)
    base = rng.random((n_words, n_words)) + 0.2
    base *= (1.0 - rho) / base.sum(axis=1, keepdims=True)
    init_w = rng.random(n_words) + 0.2
    init_w *= (1.0 - rho) / init_w.sum()

    d_rows = rng.standard_normal((n_words, n_words))
    d_rows -= d_rows.mean(axis=1, keepdims=True)
    d_init = rng.standard_normal(n_words)
    d_init -= d_init.mean()

    # Largest step-scales that keep every entry positive at delta0.
    with np.errstate(divide="ignore"):
        row_scale = 0.9 * float(np.min(np.where(d_rows < 0, base / -d_rows, np.inf)))
        init_scale = 0.9 * float(np.min(np.where(d_init < 0, init_w / -d_init, np.inf)))

    deltas = delta0 * 0.5 ** np.arange(n_halvings + 1)

    def build(delta: float, theta: float) -> AbsorbingMarkovPair:
        size = n_words + 1
        a = np.zeros((size, size))
        a[:n_words, :n_words] = base
        a[:n_words, n_words] = rho
        a[n_words, n_words] = 1.0
        b = a.copy()
        b[:n_words, :n_words] = base + (theta * delta * row_scale) * d_rows
        pa = np.concatenate([init_w, [rho]])
        pb = np.concatenate([init_w + (delta * init_scale) * d_init, [rho]])
        return AbsorbingMarkovPair(a_matrix=a, b_matrix=b, rho=rho, p_init_a=pa, p_init_b=pb)

    theta = 0.5
    for _ in range(60):
        reports = [distortion_rate(build(d, theta)) for d in deltas]
        if all(r.row_condition_ok for r in reports):
            break
        theta *= 0.5
    else:
        raise AbsorbingPairError("could not satisfy the row-divergence condition")

    ratios = np.array([r.ratio for r in reports])
    return LimitProbe(
        rho=rho,
        deltas=deltas,
        ratios=ratios,
        bound=float(rho**-0.5),
        monotone_decreasing=bool(np.all(np.diff(ratios) <= 1e-12)),
        row_condition_ok=True,
    )


@dataclass(frozen=True)
class ClosedTextDistribution:
    """Explicit finite distribution over enumerated closed texts.

    ``texts[i]`` is a tuple of word indices (end token implied after the
    last); ``weights[i]`` its probability.
    """

    texts: tuple[tuple[int, ...], ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if len(self.texts) != w.size:
            raise ValueError("one weight per text required")
        require_valid(w)
        object.__setattr__(self, "weights", w)
        w.setflags(write=False)

    def first_word_marginal(self, vocab_size: int) -> np.ndarray:
        """Total probability per first word (empty text counts as end)."""
        out = np.zeros(vocab_size)
        for text, w in zip(self.texts, self.weights):
            first = text[0] if text else vocab_size - 1
            out[first] += w
        return out

    def mix(self, other: "ClosedTextDistribution", alpha: float) -> "ClosedTextDistribution":
        if self.texts != other.texts:
            raise ValueError("mixture requires identical text enumerations")
        return ClosedTextDistribution(
            texts=self.texts,
            weights=alpha * self.weights + (1.0 - alpha) * other.weights,
        )


def phi_linearity_check(
    x1: ClosedTextDistribution,
    x2: ClosedTextDistribution,
    alpha: float,
    vocab_size: int,
) -> float:
    """Largest coordinate gap between marginal-of-mixture and mixture-of-marginals."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    mixed = x1.mix(x2, alpha).first_word_marginal(vocab_size)
    parts = alpha * x1.first_word_marginal(vocab_size) + (1.0 - alpha) * x2.first_word_marginal(
        vocab_size
    )
    return float(np.abs(mixed - parts).max())


@dataclass(frozen=True)
class GammaExperiment:
    """Variance-mean scaling exponent before and after pairwise merging."""

    n_contexts: int
    gamma_in: float
    gamma_before: float
    gamma_after: float
    mean_levels: np.ndarray
    frequencies: np.ndarray = field(repr=False)
    clipped_fraction: float = 0.0
    variance_halving: np.ndarray | None = None


def gamma_merge_experiment(
    gamma_in: float,
    beta: float,
    n_contexts: int,
    mean_range: tuple[float, float] = (1e-3, 1e-1),
    seed: int = 0,
    n_levels: int = 8,
) -> GammaExperiment:
    """Synthesize context frequencies with variance ``beta * mu**gamma``
    and test whether pairwise merging preserves the exponent.

    At each of ``n_levels`` log-spaced mean levels, ``n_contexts``
    independent frequencies are drawn from a normal law with that mean
    and variance; negative draws are clipped to zero and the clipped
    fraction reported (choose ``beta`` small enough that clipping is
    rare, or the synthesized exponent will drift). The exponent is the
    least-squares slope of log variance on log mean across levels,
    fitted before and after merging adjacent context pairs by averaging
    their frequencies.
    """
    if n_contexts < 2 or n_contexts % 2:
        raise ValueError("n_contexts must be even and >= 2")
    if not (0.0 < mean_range[0] < mean_range[1]):
        raise ValueError("mean_range must be increasing and positive")
    rng = np.random.default_rng(seed)
    mus = np.geomspace(mean_range[0], mean_range[1], n_levels)
    freqs = np.empty((n_levels, n_contexts))
    clipped = 0
    for i, mu in enumerate(mus):
        sigma = float(np.sqrt(beta * mu**gamma_in))
        draws = rng.normal(mu, sigma, size=n_contexts)
        clipped += int((draws < 0).sum())
        freqs[i] = np.maximum(draws, 0.0)

    merged = 0.5 * (freqs[:, 0::2] + freqs[:, 1::2])

    def fit(mat: np.ndarray) -> float:
        means = mat.mean(axis=1)
        variances = mat.var(axis=1)
        res = linregress(np.log(means), np.log(variances))
        return float(res.slope)

    return GammaExperiment(
        n_contexts=n_contexts,
        gamma_in=gamma_in,
        gamma_before=fit(freqs),
        gamma_after=fit(merged),
        mean_levels=mus,
        frequencies=freqs,
        clipped_fraction=clipped / freqs.size,
        variance_halving=merged.var(axis=1) / freqs.var(axis=1),
    )
