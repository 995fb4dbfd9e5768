"""Bit-exact file formats: binary PSEQ sequences, TSV curves, JSON estimates.

PSEQ layout: a 32-byte little-endian header followed by the row-major
payload.

====== ======= =====================================
offset size    field
====== ======= =====================================
0      4       magic ``b"PSEQ"``
4      4       format version, currently 1 (u32)
8      8       number of rows N (u64)
16     4       row width K (u32)
20     1       dtype code: 0 = float32, 1 = float64
21     11      reserved, zero
====== ======= =====================================

Rows are validated on read with a tolerance tied to the stored
precision (1e-4 for float32, 1e-9 for float64). A JSONL form (one
JSON row-array per line) is accepted for hand-written fixtures; the
binary format is canonical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .prob import TOL_F32, TOL_F64, renormalize, require_valid

MAGIC = b"PSEQ"
VERSION = 1
HEADER_STRUCT = struct.Struct("<4sIQIB11x")
HEADER_SIZE = HEADER_STRUCT.size  # 32

_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CHUNK_ROWS = 4096


class PseqFormatError(ValueError):
    """The file is not a well-formed PSEQ stream."""


@dataclass(frozen=True)
class PseqHeader:
    n_steps: int
    dim: int
    dtype_code: int

    @property
    def dtype(self) -> np.dtype:
        return _DTYPE_CODES[self.dtype_code]

    @property
    def payload_bytes(self) -> int:
        return self.n_steps * self.dim * self.dtype.itemsize

    @property
    def tolerance(self) -> float:
        return TOL_F32 if self.dtype_code == 0 else TOL_F64

    def encode(self) -> bytes:
        return HEADER_STRUCT.pack(MAGIC, VERSION, self.n_steps, self.dim, self.dtype_code)

    @classmethod
    def decode(cls, raw: bytes) -> "PseqHeader":
        if len(raw) < HEADER_SIZE:
            raise PseqFormatError(f"truncated header: {len(raw)} bytes, need {HEADER_SIZE}")
        magic, version, n_steps, dim, code = HEADER_STRUCT.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise PseqFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise PseqFormatError(f"unsupported version {version}")
        if code not in _DTYPE_CODES:
            raise PseqFormatError(f"unknown dtype code {code}")
        if n_steps < 1 or dim < 1:
            raise PseqFormatError(f"degenerate shape {n_steps}x{dim}")
        return cls(n_steps=n_steps, dim=dim, dtype_code=code)


def _resolve_dtype(dtype) -> np.dtype:
    if isinstance(dtype, str):
        dtype = {"f32": np.float32, "f64": np.float64}.get(dtype, dtype)
    dt = np.dtype(dtype)
    if dt not in _CODE_FOR:
        raise ValueError(f"PSEQ stores float32 or float64 rows, not {dt}")
    return dt


def write_pseq(rows, path, dtype="f64") -> None:
    """Write a sequence as PSEQ. Values are cast to ``dtype`` chunk-wise."""
    seq = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise ValueError(f"expected a nonempty (N, K) array, got shape {seq.shape}")
    dt = _resolve_dtype(dtype)
    header = PseqHeader(seq.shape[0], seq.shape[1], _CODE_FOR[dt])
    with open(path, "wb") as fh:
        fh.write(header.encode())
        for i0 in range(0, seq.shape[0], _CHUNK_ROWS):
            fh.write(seq[i0 : i0 + _CHUNK_ROWS].astype(dt.newbyteorder("<")).tobytes())


def read_header(path) -> PseqHeader:
    with open(path, "rb") as fh:
        return PseqHeader.decode(fh.read(HEADER_SIZE))


def read_pseq(
    path,
    tolerance: float | None = None,
    validate: bool = True,
    renormalize_rows: bool = False,
) -> np.ndarray:
    """Read a PSEQ file into a float64 ``(N, K)`` array.

    The payload length must match the header exactly; nothing larger
    than the declared size is ever allocated, so a corrupt header
    cannot trigger a huge allocation. ``tolerance`` defaults to the
    tier implied by the stored dtype.
    """
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        header = PseqHeader.decode(fh.read(HEADER_SIZE))
        expected = header.payload_bytes
        if size - HEADER_SIZE != expected:
            raise PseqFormatError(
                f"payload is {size - HEADER_SIZE} bytes, header declares {expected}"
            )
        raw = np.fromfile(fh, dtype=header.dtype, count=header.n_steps * header.dim)
    if raw.size != header.n_steps * header.dim:
        raise PseqFormatError("short read of payload")
    rows = raw.astype(np.float64).reshape(header.n_steps, header.dim)
    if renormalize_rows:
        rows = renormalize(rows)
    if validate:
        tol = header.tolerance if tolerance is None else tolerance
        require_valid(rows, tol)
    return rows


def read_jsonl(path, tolerance: float | None = TOL_F64, validate: bool = True) -> np.ndarray:
    """Read a JSONL fixture: one JSON array (a row) per nonblank line."""
    if tolerance is None:
        tolerance = TOL_F64
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if not isinstance(row, list):
                raise PseqFormatError(f"line {line_no}: expected a JSON array")
            rows.append(row)
    if not rows:
        raise PseqFormatError("no rows in JSONL file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise PseqFormatError(f"JSONL rows have inconsistent lengths {sorted(widths)}")
    seq = np.asarray(rows, dtype=np.float64)
    if validate:
        require_valid(seq, tolerance)
    return seq


def read_sequence(path, **kwargs) -> np.ndarray:
    """Dispatch on extension: ``.jsonl`` fixtures, anything else PSEQ."""
    if str(path).endswith(".jsonl"):
        kwargs.pop("renormalize_rows", None)
        return read_jsonl(path, **kwargs)
    return read_pseq(path, **kwargs)


def write_curve_tsv(curve, fh) -> None:
    """Write ``epsilon<TAB>C`` lines at full float precision."""
    for eps, c in zip(curve.epsilons, curve.c_values):
        fh.write(f"{float(eps)!r}\t{float(c)!r}\n")


def estimate_json(
    est,
    n_pairs: int,
    metric: str,
    eta: float | None,
    m_groups: int | None,
    seed: int | None,
) -> str:
    """Serialize a dimension estimate plus run provenance as one JSON object."""
    payload = {
        "nu_hat": float(est.nu_hat),
        "intercept": float(est.intercept),
        "r_squared": float(est.r_squared),
        "fit_lo": float(est.fit_lo),
        "fit_hi": float(est.fit_hi),
        "n_points": int(est.n_curve_points_used),
        "n_pairs": int(n_pairs),
        "metric": metric,
        "eta": None if eta is None else float(eta),
        "m_groups": None if m_groups is None else int(m_groups),
        "seed": None if seed is None else int(seed),
    }
    return json.dumps(payload)
