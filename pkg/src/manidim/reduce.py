"""Modulo grouping of vocabulary coordinates onto a smaller simplex.

Coordinate ``w`` of the source distribution is added into group
``w mod M`` (0-based indices), so the output is again a distribution,
over M groups.  The grouping is deliberately arbitrary: a fixed
"random-looking" linear projection is enough to preserve the estimated
correlation dimension while cutting the per-pair distance cost from
O(K) to O(M).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob import as_sequence

_CHUNK_ROWS = 256


@dataclass(frozen=True)
class ReductionSpec:
    """Target group count M for a source vocabulary of size K."""

    m_groups: int
    source_dim: int

    def __post_init__(self):
        if not (1 <= self.m_groups <= self.source_dim):
            raise ValueError(
                f"need 1 <= m_groups <= source_dim, got M={self.m_groups} K={self.source_dim}"
            )

    @property
    def is_identity(self) -> bool:
        return self.m_groups == self.source_dim


def modulo_project(p, spec: ReductionSpec) -> np.ndarray:
    """Project one distribution of length K onto M modulo groups."""
    vec = np.asarray(p, dtype=np.float64).ravel()
    if vec.shape[0] != spec.source_dim:
        raise ValueError(
            f"vector length {vec.shape[0]} does not match source_dim {spec.source_dim}"
        )
    return _project_block(vec[None, :], spec.m_groups)[0]


def project_sequence(rows, spec: ReductionSpec) -> np.ndarray:
    """Row-wise modulo projection of a whole sequence (N preserved)."""
    seq = as_sequence(rows)
    if seq.shape[1] != spec.source_dim:
        raise ValueError(
            f"sequence width {seq.shape[1]} does not match source_dim {spec.source_dim}"
        )
    if spec.is_identity:
        return seq.copy()
    out = np.empty((seq.shape[0], spec.m_groups))
    for i0 in range(0, seq.shape[0], _CHUNK_ROWS):
        out[i0 : i0 + _CHUNK_ROWS] = _project_block(seq[i0 : i0 + _CHUNK_ROWS], spec.m_groups)
    return out


def _project_block(block: np.ndarray, m: int) -> np.ndarray:
    # Pad K up to a multiple of M, then index w = q*M + r lands in group
    # r = w mod M; summing over q collapses each residue class at once.
    n, k = block.shape
    pad = (-k) % m
    if pad:
        block = np.pad(block, ((0, 0), (0, pad)))
    return block.reshape(n, -1, m).sum(axis=1)
