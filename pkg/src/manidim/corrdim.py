"""Correlation-integral estimation of the correlation dimension.

The pipeline: bin all N(N-1)/2 unordered pair distances into a
log-spaced histogram, accumulate the cumulative pair fraction C(eps),
and fit the slope of log C against log eps over a scaling region.  The
slope is the correlation-dimension estimate and the fit's R^2 measures
how self-similar the trajectory is.

Distances are never materialized as an N x N matrix.  Pairs are
enumerated in row-block tiles and each tile's similarities come from
one matrix product, so memory stays at O(block^2) and the inner loop is
BLAS.  Binning happens in similarity space: for the Fisher-Rao metric a
distance threshold ``e`` maps to a Bhattacharyya-coefficient threshold
``cos(e/2)``, so only the 64-odd bin edges ever pass through arccos,
not the ~10^8 pair values.  (Consequence shared with any double-float
arccos path: Fisher-Rao distances below ~2e-8 are indistinguishable
from zero.)

Self-pairs are excluded and counts are normalized by N(N-1)/2; keeping
the diagonal would only add a constant offset at small eps and the
fitted slope is unaffected.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from . import metrics as _metrics
from .metrics import EUCLIDEAN, FISHER_RAO, SqrtEmbedding, sqrt_embed
from .prob import FilterSpec, apply_filter, as_sequence, renormalize, require_valid
from .reduce import ReductionSpec, project_sequence

_TILE = 2048
_SUBSAMPLE = 1000

# Auto fit-region parameters (see fit_dimension).
MIN_WINDOW_POINTS = 8
R2_THRESHOLD = 0.98
SATURATION_FRACTION = 0.6
C_CEILING = 0.5
PAIR_FLOOR = 10


class EstimationError(ValueError):
    """The sequence cannot support a dimension estimate."""


class FilterTooStrictError(EstimationError):
    """Filtering left too few rows to estimate from."""


@dataclass(frozen=True)
class EpsilonGrid:
    """Strictly increasing, positive distance-bin edges (log-spaced)."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2:
            raise ValueError("need at least two edges")
        if e[0] <= 0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must be positive and strictly increasing")
        object.__setattr__(self, "edges", e)
        e.setflags(write=False)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    @classmethod
    def log_spaced(cls, lo: float, hi: float, n_bins: int) -> "EpsilonGrid":
        if not (0 < lo < hi):
            raise ValueError(f"need 0 < lo < hi, got {lo}, {hi}")
        # Pad the top edge by one part in 1e9 so the diameter pair falls
        # inside the last bin instead of overflow.
        return cls(np.geomspace(lo, hi * (1.0 + 1e-9), n_bins + 1))


@dataclass(frozen=True)
class DistanceHistogram:
    """Counts of unordered pair distances per grid bin.

    ``counts[i]`` covers ``[edges[i], edges[i+1])``; distances below the
    first edge (including exact duplicates at distance zero) go to
    ``underflow``, distances at or above the last edge to ``overflow``.
    """

    grid: EpsilonGrid
    counts: np.ndarray
    underflow: int
    overflow: int
    n_points: int

    def __post_init__(self):
        self.counts.setflags(write=False)
        if self.counts.size != self.grid.n_bins:
            raise ValueError("counts do not match grid bins")
        if self.total != self.n_pairs_total:
            raise ValueError(
                f"pair conservation violated: {self.total} binned, "
                f"{self.n_pairs_total} pairs exist"
            )

    @property
    def n_pairs_total(self) -> int:
        return self.n_points * (self.n_points - 1) // 2

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


@dataclass(frozen=True)
class CorrelationCurve:
    """Sampled correlation integral: C(eps) at the upper bin edges.

    ``n_pairs`` and ``diameter`` carry provenance from the histogram
    when available; synthetic curves may leave them unset.
    """

    epsilons: np.ndarray
    c_values: np.ndarray
    n_pairs: int | None = None
    diameter: float | None = None

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=np.float64)
        cv = np.asarray(self.c_values, dtype=np.float64)
        if eps.shape != cv.shape or eps.ndim != 1:
            raise ValueError("epsilons and c_values must be equal-length vectors")
        if np.any(np.diff(cv) < 0):
            raise ValueError("C(eps) must be nondecreasing")
        if cv.size and (cv[0] <= 0 or cv[-1] > 1):
            raise ValueError("C values must lie in (0, 1]")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "c_values", cv)
        eps.setflags(write=False)
        cv.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.epsilons.size


@dataclass(frozen=True)
class DimensionEstimate:
    """Least-squares slope of log C vs log eps over the fitted region."""

    nu_hat: float
    intercept: float
    r_squared: float
    fit_lo: float
    fit_hi: float
    n_curve_points_used: int
    auto_region: bool = True

    def __post_init__(self):
        if self.fit_lo >= self.fit_hi:
            raise ValueError("fit_lo must be below fit_hi")


def _pair_values_to_bins(vals: np.ndarray, thresholds: np.ndarray, descending: bool) -> np.ndarray:
    """Map similarity/d^2 values to bin slots via the transformed edges.

    Returns, per value, the count of edges at or below the implied
    distance; 0 means underflow, ``len(thresholds)`` means overflow.
    """
    if descending:
        # Fisher-Rao: value = Bhattacharyya coefficient, edge k holds
        # cos(edges[k]/2); d >= edges[k]  <=>  value <= thresholds[k].
        return thresholds.size - np.searchsorted(thresholds[::-1], vals, side="left")
    # Euclidean: value = squared distance, thresholds = edges^2.
    return np.searchsorted(thresholds, vals, side="right")


def _tile_ranges(n: int, tile: int) -> list[tuple[int, int]]:
    return [(i, min(i + tile, n)) for i in range(0, n, tile)]


def _accumulate_tiles(
    emb: np.ndarray,
    sq_norms: np.ndarray | None,
    thresholds: np.ndarray,
    descending: bool,
    row_blocks: list[tuple[int, int]],
    all_blocks: list[tuple[int, int]],
    n_slots: int,
) -> np.ndarray:
    """Bin every pair (t, s>t) whose t-row lives in ``row_blocks``."""
    counts = np.zeros(n_slots, dtype=np.int64)
    for i0, i1 in row_blocks:
        a = emb[i0:i1]
        for j0, j1 in all_blocks:
            if j1 <= i0:
                continue
            g = a @ emb[j0:j1].T
            if sq_norms is not None:
                g *= -2.0
                g += sq_norms[i0:i1, None]
                g += sq_norms[None, j0:j1]
                np.maximum(g, 0.0, out=g)
                vals = g
            else:
                vals = np.clip(g, 0.0, 1.0)
            if j0 == i0:
                iu = np.triu_indices(i1 - i0, k=1, m=j1 - j0)
                flat = vals[iu]
            else:
                flat = vals.ravel()
            slots = _pair_values_to_bins(flat, thresholds, descending)
            counts += np.bincount(slots, minlength=n_slots)
    return counts


def _prepare(data, metric: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Return (matrix used in the tile products, squared norms or None)."""
    if metric == FISHER_RAO:
        emb = data if isinstance(data, SqrtEmbedding) else sqrt_embed(as_sequence(data))
        return emb.rows, None
    if metric == EUCLIDEAN:
        if isinstance(data, SqrtEmbedding):
            raise ValueError("euclidean distances act on raw rows, not a sqrt embedding")
        seq = as_sequence(data)
        return seq, (seq * seq).sum(axis=1)
    raise ValueError(f"unknown metric {metric!r}, expected one of {_metrics.METRICS}")


def _subsample_distances(emb: np.ndarray, sq_norms: np.ndarray | None) -> np.ndarray:
    n = emb.shape[0]
    idx = np.unique(np.linspace(0, n - 1, min(n, _SUBSAMPLE)).astype(np.int64))
    sub = emb[idx]
    g = sub @ sub.T
    if sq_norms is None:
        d = 2.0 * np.arccos(np.clip(g, 0.0, 1.0))
    else:
        sn = sq_norms[idx]
        d2 = np.maximum(sn[:, None] + sn[None, :] - 2.0 * g, 0.0)
        d = np.sqrt(d2)
    return d[np.triu_indices(len(idx), k=1)]


def auto_grid(data, metric: str = FISHER_RAO, n_bins: int = 64) -> EpsilonGrid:
    """Log-spaced grid spanning the pair distances of a deterministic subsample.

    Up to 1000 evenly spaced rows are sampled; the grid runs from their
    smallest nonzero pair distance to their largest. Pairs of the full
    sequence falling outside land in underflow/overflow, which the
    cumulative curve accounts for.
    """
    emb, sq_norms = _prepare(data, metric)
    if emb.shape[0] < 2:
        raise EstimationError("need at least 2 points to build a distance grid")
    d = _subsample_distances(emb, sq_norms)
    nz = d[d > 0]
    if nz.size == 0:
        raise EstimationError("all subsampled points coincide; no distance scale")
    return EpsilonGrid.log_spaced(float(nz.min()), float(d.max()), n_bins)


def pairwise_histogram(
    data,
    metric: str = FISHER_RAO,
    grid: EpsilonGrid | None = None,
    n_threads: int = 1,
) -> DistanceHistogram:
    """Histogram all unordered off-diagonal pair distances.

    Deterministic for fixed inputs regardless of ``n_threads``: the
    pair set is tiled identically either way, every pair's value is
    computed wholly inside one tile, and integer per-worker counters
    merge by addition.
    """
    emb, sq_norms = _prepare(data, metric)
    n = emb.shape[0]
    if n < 2:
        raise EstimationError("need at least 2 points for pairwise distances")
    if grid is None:
        grid = auto_grid(data, metric)

    if metric == FISHER_RAO:
        thresholds = np.cos(grid.edges / 2.0)
        descending = True
    else:
        thresholds = grid.edges**2
        descending = False

    blocks = _tile_ranges(n, _TILE)
    n_slots = grid.edges.size + 1
    if n_threads <= 1 or len(blocks) == 1:
        counts = _accumulate_tiles(emb, sq_norms, thresholds, descending, blocks, blocks, n_slots)
    else:
        workers = min(n_threads, len(blocks))
        shards = [blocks[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(
                lambda shard: _accumulate_tiles(
                    emb, sq_norms, thresholds, descending, shard, blocks, n_slots
                ),
                shards,
            )
            counts = sum(parts)

    # Slot k = number of edges at or below the distance: slot 0 is
    # underflow, slot len(edges) is overflow, slot k covers bin k-1.
    return DistanceHistogram(
        grid=grid,
        counts=counts[1:-1].copy(),
        underflow=int(counts[0]),
        overflow=int(counts[-1]),
        n_points=n,
    )


def correlation_curve(hist: DistanceHistogram) -> CorrelationCurve:
    """Cumulative pair fraction below each upper bin edge.

    ``C(edges[i+1]) = (underflow + counts[0..i]) / n_pairs``. Underflow
    (including exact duplicates) is counted in every C value but never
    plotted at its own epsilon; zero-valued points are dropped.
    """
    cum = hist.underflow + np.cumsum(hist.counts)
    eps = hist.grid.edges[1:]
    c = cum / hist.n_pairs_total
    keep = c > 0
    return CorrelationCurve(
        epsilons=eps[keep],
        c_values=c[keep],
        n_pairs=hist.n_pairs_total,
        diameter=float(hist.grid.edges[-1]),
    )


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    res = linregress(x, y)
    return float(res.slope), float(res.intercept), float(res.rvalue**2)


def fit_dimension(
    curve: CorrelationCurve,
    region: tuple[float, float] | None = None,
    min_points: int = MIN_WINDOW_POINTS,
    r2_threshold: float = R2_THRESHOLD,
    saturation_fraction: float = SATURATION_FRACTION,
) -> DimensionEstimate:
    """Ordinary least squares of log C on log eps over a scaling region.

    With an explicit ``region=(lo, hi)`` the fit uses every curve point
    inside it (at least 5 required) and no automatic selection runs.

    Automatic selection searches contiguous windows of at least
    ``min_points`` curve points, restricted to points with
    ``C in [10/n_pairs, 0.5]`` (shot noise below, saturation above) and,
    when the curve knows its diameter, ``eps <= 0.6 * diameter`` --
    near the diameter C(eps) climbs its final shoulder toward 1 and the
    slope there reflects the trajectory's extent, not its scaling.  The
    widest window with R^2 >= 0.98 wins, ties broken by higher R^2.
    Degraded data falls back in order: drop the diameter guard if it
    starves the search, then accept the best-R^2 minimal window, then
    fit all usable points.
    """
    eps = curve.epsilons
    cv = curve.c_values
    if eps.size < 5:
        raise EstimationError(f"curve has {eps.size} usable points, need at least 5")
    x = np.log(eps)
    y = np.log(cv)

    if region is not None:
        lo, hi = float(region[0]), float(region[1])
        if not lo < hi:
            raise ValueError("region lower bound must be below upper bound")
        mask = (eps >= lo) & (eps <= hi)
        if mask.sum() < 5:
            raise EstimationError(
                f"only {int(mask.sum())} curve points inside ({lo:g}, {hi:g}), need 5"
            )
        slope, intercept, r2 = _ols(x[mask], y[mask])
        sel = np.nonzero(mask)[0]
        return DimensionEstimate(
            nu_hat=slope,
            intercept=intercept,
            r_squared=r2,
            fit_lo=float(eps[sel[0]]),
            fit_hi=float(eps[sel[-1]]),
            n_curve_points_used=int(mask.sum()),
            auto_region=False,
        )

    eligible = np.ones(eps.size, dtype=bool)
    if curve.n_pairs is not None:
        eligible &= cv >= PAIR_FLOOR / curve.n_pairs
    eligible &= cv <= C_CEILING
    if curve.diameter is not None:
        capped = eligible & (eps <= saturation_fraction * curve.diameter)
        if capped.sum() >= min_points:
            eligible = capped
    if eligible.sum() < 5:
        eligible = np.ones(eps.size, dtype=bool)

    best_key: tuple[int, float] | None = None
    best: tuple[int, int, float, float, float] | None = None
    idx = np.nonzero(eligible)[0]
    for a in idx:
        b = a
        while b + 1 < eps.size and eligible[b + 1]:
            b += 1
            if b - a + 1 < min_points:
                continue
            slope, intercept, r2 = _ols(x[a : b + 1], y[a : b + 1])
            if r2 >= r2_threshold:
                key = (b - a + 1, r2)
                if best_key is None or key > best_key:
                    best_key = key
                    best = (a, b, slope, intercept, r2)

    if best is None:
        # No window reaches the R^2 bar: take the best-R^2 window of
        # minimal width, or everything eligible if even that fails.
        width = min(min_points, int(eligible.sum()))
        width = max(width, 5)
        fallback_key = -1.0
        for a in idx:
            b = a + width - 1
            if b >= eps.size or not eligible[a : b + 1].all():
                continue
            slope, intercept, r2 = _ols(x[a : b + 1], y[a : b + 1])
            if r2 > fallback_key:
                fallback_key = r2
                best = (a, b, slope, intercept, r2)
        if best is None:
            sel = idx if idx.size >= 5 else np.arange(eps.size)
            slope, intercept, r2 = _ols(x[sel], y[sel])
            best = (int(sel[0]), int(sel[-1]), slope, intercept, r2)

    a, b, slope, intercept, r2 = best
    return DimensionEstimate(
        nu_hat=float(slope),
        intercept=float(intercept),
        r_squared=float(r2),
        fit_lo=float(eps[a]),
        fit_hi=float(eps[b]),
        n_curve_points_used=int(b - a + 1),
    )


@dataclass(frozen=True)
class EstimateResult:
    estimate: DimensionEstimate
    curve: CorrelationCurve
    histogram: DistanceHistogram
    n_retained: int
    retained_indices: np.ndarray = field(repr=False)


def estimate(
    rows,
    filter_spec: FilterSpec | None = None,
    reduction: ReductionSpec | int | None = None,
    metric: str = FISHER_RAO,
    n_bins: int = 64,
    grid: EpsilonGrid | None = None,
    region: tuple[float, float] | None = None,
    min_retained: int = 100,
    n_threads: int = 1,
    validate: bool = True,
    tolerance: float = 1e-9,
    renormalize_rows: bool = False,
) -> EstimateResult:
    """Full pipeline: filter, reduce, histogram, curve, slope.

    Deterministic given identical inputs. Raises
    ``FilterTooStrictError`` naming the filter when fewer than
    ``min_retained`` rows survive it.
    """
    seq = as_sequence(rows)
    if renormalize_rows:
        seq = renormalize(seq)
    if validate:
        require_valid(seq, tolerance)

    if filter_spec is not None:
        seq, retained = apply_filter(seq, filter_spec)
    else:
        retained = np.arange(seq.shape[0])
    if seq.shape[0] < max(min_retained, 2):
        raise FilterTooStrictError(
            f"only {seq.shape[0]} rows retained after filtering "
            f"(spec {filter_spec}), need at least {max(min_retained, 2)}"
        )

    if reduction is not None:
        if isinstance(reduction, ReductionSpec):
            spec = reduction
        else:
            # An integer target wider than the data is a no-op, not an error.
            m = min(int(reduction), seq.shape[1])
            spec = ReductionSpec(m_groups=m, source_dim=seq.shape[1])
        if not spec.is_identity:
            seq = project_sequence(seq, spec)

    data = sqrt_embed(seq) if metric == FISHER_RAO else seq
    if grid is None:
        grid = auto_grid(data, metric, n_bins)
    hist = pairwise_histogram(data, metric, grid, n_threads=n_threads)
    curve = correlation_curve(hist)
    est = fit_dimension(curve, region=region)
    return EstimateResult(
        estimate=est,
        curve=curve,
        histogram=hist,
        n_retained=int(seq.shape[0]),
        retained_indices=retained,
    )
