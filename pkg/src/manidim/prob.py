"""Probability vectors, state sequences, entropy, and row filtering.

A state sequence is a dense ``(N, K)`` float array whose rows are
probability distributions over a K-item vocabulary: every entry is
nonnegative and each row sums to one within a tolerance tied to the
storage precision (1e-4 for data that lived in 32-bit floats, 1e-9 for
64-bit data). All functions here are pure and never mutate their input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Row-sum tolerances by the precision the data was stored at.
TOL_F32 = 1e-4
TOL_F64 = 1e-9

# Rows per chunk when sweeping sequences with very wide rows (K ~ 50k),
# keeps transient buffers around 100 MB for K=50257.
_CHUNK_ROWS = 256


class InvalidDistributionError(ValueError):
    """A vector or sequence row violates the probability invariants."""


@dataclass(frozen=True)
class RowViolation:
    """One failed invariant: which row and what went wrong."""

    row: int
    kind: str  # "negative" or "sum"
    detail: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.detail}"


@dataclass(frozen=True)
class FilterSpec:
    """Row-selection rule for isolating parts of a trajectory.

    Two modes share this spec.  In the default (high-entropy) mode a row
    is kept when its largest entry is strictly below ``eta`` and, if
    entropy bounds are set, its entropy in bits lies inside
    ``[entropy_min, entropy_max]``.  When ``argmax_word`` is given the
    comparison inverts: a row is kept when its largest entry sits at
    that vocabulary index and strictly exceeds ``eta`` (selects the
    low-entropy region owned by one word).

    ``eta == 1.0`` in the default mode disables the max-probability test
    entirely, so rows with a maximum of exactly 1.0 are kept too.
    """

    eta: float = 1.0
    entropy_min: float | None = None
    entropy_max: float | None = None
    argmax_word: int | None = None

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.entropy_min is not None and self.entropy_min < 0:
            raise ValueError("entropy_min must be >= 0")
        if self.entropy_max is not None and self.entropy_max < 0:
            raise ValueError("entropy_max must be >= 0")
        if (
            self.entropy_min is not None
            and self.entropy_max is not None
            and self.entropy_min > self.entropy_max
        ):
            raise ValueError("entropy_min must not exceed entropy_max")

    @property
    def needs_entropy(self) -> bool:
        return self.entropy_min is not None or self.entropy_max is not None


def as_sequence(rows) -> np.ndarray:
    """Coerce to a 2-D float64 array of shape (N, K), N >= 1."""
    seq = np.asarray(rows, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[None, :]
    if seq.ndim != 2 or seq.shape[0] < 1 or seq.shape[1] < 1:
        raise InvalidDistributionError(
            f"expected a nonempty 2-D sequence, got shape {seq.shape}"
        )
    return seq


def validate(rows, tolerance: float = TOL_F64) -> list[RowViolation]:
    """Check every row against the probability invariants.

    Returns an empty list iff all rows are valid at the given tolerance.
    Violations are data, not failures: each record names the row index
    and the invariant it failed (a row can fail both).
    """
    seq = as_sequence(rows)
    out: list[RowViolation] = []
    for i0 in range(0, seq.shape[0], _CHUNK_ROWS):
        chunk = seq[i0 : i0 + _CHUNK_ROWS]
        mins = chunk.min(axis=1)
        sums = chunk.sum(axis=1)
        for j in np.nonzero(mins < 0)[0]:
            out.append(
                RowViolation(i0 + int(j), "negative", f"negative entry {mins[j]:.6g}")
            )
        for j in np.nonzero(np.abs(sums - 1.0) > tolerance)[0]:
            out.append(
                RowViolation(i0 + int(j), "sum", f"sums to {sums[j]:.10g}, not 1")
            )
    out.sort(key=lambda v: v.row)
    return out


def require_valid(rows, tolerance: float = TOL_F64) -> np.ndarray:
    """Validate and return the sequence; raise listing offending rows."""
    seq = as_sequence(rows)
    violations = validate(seq, tolerance)
    if violations:
        shown = "; ".join(str(v) for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        raise InvalidDistributionError(f"invalid distribution rows: {shown}{more}")
    return seq


def renormalize(rows) -> np.ndarray:
    """Divide each row by its sum. Explicit repair, never applied silently."""
    seq = as_sequence(rows).copy()
    sums = seq.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        bad = int(np.nonzero(sums.ravel() <= 0)[0][0])
        raise InvalidDistributionError(f"row {bad} has nonpositive sum, cannot renormalize")
    seq /= sums
    return seq


def shannon_entropy(p, tolerance: float = TOL_F64) -> float:
    """Shannon entropy of one distribution, in bits, with 0*log2(0) = 0."""
    vec = require_valid(p, tolerance)
    if vec.shape[0] != 1:
        raise InvalidDistributionError("shannon_entropy expects a single vector")
    return float(entropy_bits(vec)[0])


def entropy_bits(rows) -> np.ndarray:
    """Row-wise Shannon entropy in bits for a sequence (no validation)."""
    seq = as_sequence(rows)
    out = np.empty(seq.shape[0])
    for i0 in range(0, seq.shape[0], _CHUNK_ROWS):
        chunk = seq[i0 : i0 + _CHUNK_ROWS]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(chunk > 0, chunk * np.log2(chunk, where=chunk > 0), 0.0)
        out[i0 : i0 + _CHUNK_ROWS] = -terms.sum(axis=1)
    # -0.0 from all-deterministic rows
    return out + 0.0


def apply_filter(rows, spec: FilterSpec) -> tuple[np.ndarray, np.ndarray]:
    """Select rows per ``spec``, preserving order.

    Returns ``(kept_rows, kept_indices)`` with strictly increasing
    indices into the original sequence. An empty result is legal; the
    caller decides whether that is fatal for its purpose.
    """
    seq = as_sequence(rows)
    n = seq.shape[0]
    keep = np.ones(n, dtype=bool)

    if spec.argmax_word is not None:
        if not (0 <= spec.argmax_word < seq.shape[1]):
            raise ValueError(
                f"argmax_word {spec.argmax_word} outside vocabulary of size {seq.shape[1]}"
            )
        for i0 in range(0, n, _CHUNK_ROWS):
            chunk = seq[i0 : i0 + _CHUNK_ROWS]
            mx = chunk.max(axis=1)
            keep[i0 : i0 + _CHUNK_ROWS] = (
                (chunk.argmax(axis=1) == spec.argmax_word) & (mx > spec.eta)
            )
    elif spec.eta < 1.0:
        for i0 in range(0, n, _CHUNK_ROWS):
            keep[i0 : i0 + _CHUNK_ROWS] = seq[i0 : i0 + _CHUNK_ROWS].max(axis=1) < spec.eta

    if spec.needs_entropy:
        ent = entropy_bits(seq)
        if spec.entropy_min is not None:
            keep &= ent >= spec.entropy_min
        if spec.entropy_max is not None:
            keep &= ent <= spec.entropy_max

    idx = np.nonzero(keep)[0]
    return seq[idx], idx
