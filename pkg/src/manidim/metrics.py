"""Distances between points on the simplex of discrete distributions.

The primary metric is the Fisher-Rao geodesic distance, which for
discrete distributions equals twice the Bhattacharyya angle:
``2 * arccos(sum_w sqrt(p_w * q_w))``, with range [0, pi].  In
square-root coordinates the simplex maps isometrically onto the
positive orthant of the unit sphere, so the Bhattacharyya coefficient
of two rows is the plain dot product of their square-root embeddings;
``SqrtEmbedding`` precomputes that once per sequence.  A conventional
Euclidean distance on the raw probability vectors is provided for
comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob import as_sequence

FISHER_RAO = "fisher-rao"
EUCLIDEAN = "euclidean"
METRICS = (FISHER_RAO, EUCLIDEAN)


def _check_same_dim(p: np.ndarray, q: np.ndarray):
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")


def bhattacharyya_coeff(p, q) -> float:
    """Overlap ``sum_w sqrt(p_w q_w)``, clamped into [0, 1].

    The clamp protects the downstream arccos: accumulation error can
    push the sum to 1 + O(1e-16), whose arccos would be NaN.
    """
    pv = np.asarray(p, dtype=np.float64).ravel()
    qv = np.asarray(q, dtype=np.float64).ravel()
    _check_same_dim(pv, qv)
    return float(np.clip(np.sqrt(pv * qv).sum(), 0.0, 1.0))


def fisher_rao(p, q) -> float:
    """Fisher-Rao distance (radians, in [0, pi]) between two distributions."""
    return float(2.0 * np.arccos(bhattacharyya_coeff(p, q)))


def euclidean(p, q) -> float:
    """L2 norm of the elementwise difference of two distributions."""
    pv = np.asarray(p, dtype=np.float64).ravel()
    qv = np.asarray(q, dtype=np.float64).ravel()
    _check_same_dim(pv, qv)
    return float(np.linalg.norm(pv - qv))


@dataclass(frozen=True)
class SqrtEmbedding:
    """Rows of elementwise square roots; unit vectors on the orthant.

    ``rows[t] @ rows[s]`` equals the Bhattacharyya coefficient of the
    two source distributions. Immutable after construction and safe to
    share across threads.
    """

    rows: np.ndarray

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def sqrt_embed(rows, norm_tolerance: float = 1e-6) -> SqrtEmbedding:
    """Embed a valid sequence into square-root coordinates.

    Raises when any embedded row strays from unit Euclidean norm by
    more than ``norm_tolerance`` (symptom of an unnormalized source row).
    """
    seq = as_sequence(rows)
    emb = np.sqrt(seq)
    norms = np.linalg.norm(emb, axis=1)
    bad = np.nonzero(np.abs(norms - 1.0) > norm_tolerance)[0]
    if bad.size:
        raise ValueError(
            f"row {int(bad[0])} embeds to norm {norms[bad[0]]:.8f}, "
            f"outside 1 +/- {norm_tolerance:g}"
        )
    return SqrtEmbedding(emb)
