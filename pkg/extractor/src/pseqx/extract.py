"""Next-token probability extraction from causal language models.

For each step t the model's softmax over the vocabulary, conditioned on
the trailing window of ``context_length`` tokens, becomes one row of a
probability sequence. Rows are modulo-reduced (0-based token ids, the
same grouping rule the analysis toolkit uses) and written as a PSEQ
file for downstream dimension estimation.

Two windowing modes:

``exact``  one prediction per step with a fresh trailing window, so
           every row sees exactly ``context_length`` tokens of context
           (stride-1 recompute; the default).
``fast``   one forward pass per non-overlapping window, reusing every
           position's output; a row's effective context then shrinks to
           its offset within the window. Cheaper by a factor of the
           window length, at the cost of boundary effects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

from manidim.pseq import write_pseq


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractConfig:
    model: str
    context_length: int = 512
    skip_prefix_tokens: int = 0
    max_steps: int | None = None
    m_groups: int = 1000
    dtype: str = "f32"
    mode: str = "exact"
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self):
        if self.context_length < 1:
            raise ValueError("context_length must be >= 1")
        if self.skip_prefix_tokens < 0:
            raise ValueError("skip_prefix_tokens must be >= 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1 when set")
        if self.m_groups < 1:
            raise ValueError("m_groups must be >= 1")
        if self.mode not in ("exact", "fast"):
            raise ValueError(f"mode must be 'exact' or 'fast', got {self.mode!r}")


@dataclass(frozen=True)
class ExtractReport:
    """What was written, plus optional undeduced rows for cross-checks."""

    n_steps: int
    dim: int
    vocab_size: int
    n_tokens: int
    first_step: int
    full_rows: np.ndarray | None = None


def _load(config: ExtractConfig):
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model)
        model = AutoModelForCausalLM.from_pretrained(config.model)
    except Exception as exc:
        raise ExtractionError(f"cannot load model {config.model!r}: {exc}") from exc
    model.eval()
    model.to(config.device)
    return tokenizer, model


def _reduce_rows(probs: np.ndarray, m_groups: int) -> np.ndarray:
    """Group vocabulary columns by token id modulo ``m_groups``."""
    n, k = probs.shape
    if m_groups == k:
        return probs
    pad = (-k) % m_groups
    if pad:
        probs = np.pad(probs, ((0, 0), (0, pad)))
    return probs.reshape(n, -1, m_groups).sum(axis=1)


def _renormalize(rows: np.ndarray) -> np.ndarray:
    """Exact row renormalization in float64 after the float32 softmax."""
    sums = rows.sum(axis=1, dtype=np.float64)
    bad = np.abs(sums - 1.0) > 1e-3
    if bad.any():
        raise ExtractionError(
            f"softmax row {int(np.nonzero(bad)[0][0])} sums to {sums[bad][0]:.6f}, "
            "expected 1 within 1e-3"
        )
    return rows.astype(np.float64) / sums[:, None]


def extract(
    text: str,
    config: ExtractConfig,
    output_path,
    dump_full_rows: int = 0,
) -> ExtractReport:
    """Run the model over ``text`` and write the PSEQ file.

    Step t predicts token t from the preceding window; steps start at
    ``max(context_length, skip_prefix_tokens)`` so every emitted row has
    a full window behind it, and stop after ``max_steps`` rows when set.
    Rows are written strictly in step order. With ``dump_full_rows = n``
    the first n full-vocabulary rows are returned alongside for
    equivalence checks against the analysis toolkit's reducer.
    """
    tokenizer, model = _load(config)
    vocab = int(model.config.vocab_size)
    if config.m_groups > vocab:
        raise ExtractionError(
            f"m_groups {config.m_groups} exceeds the model vocabulary {vocab}"
        )

    ids = tokenizer.encode(text)
    c = config.context_length
    if len(ids) < c + 1:
        raise ExtractionError(
            f"text tokenizes to {len(ids)} tokens, need at least context_length + 1 = {c + 1}"
        )
    first = max(c, config.skip_prefix_tokens)
    steps = list(range(first, len(ids)))
    if config.max_steps is not None:
        steps = steps[: config.max_steps]
    if not steps:
        raise ExtractionError("no steps left after skip_prefix_tokens/max_steps")

    ids_t = torch.tensor(ids, dtype=torch.long, device=config.device)
    chunks: list[np.ndarray] = []
    kept_full: list[np.ndarray] = []
    dump_left = dump_full_rows

    with torch.no_grad():
        if config.mode == "exact":
            for b0 in range(0, len(steps), config.batch_size):
                batch = steps[b0 : b0 + config.batch_size]
                windows = torch.stack([ids_t[t - c : t] for t in batch])
                logits = model(windows).logits[:, -1, :]
                probs = torch.softmax(logits.float(), dim=-1).cpu().numpy()
                dump_left = _collect(probs, chunks, kept_full, dump_left, config.m_groups)
        else:
            # One pass per non-overlapping window; position j predicts
            # token j+1 of the window, so its context is the window head.
            for t0 in range(0, len(ids) - 1, c):
                window = ids_t[t0 : t0 + c].unsqueeze(0)
                logits = model(window).logits[0].float()
                probs = torch.softmax(logits, dim=-1).cpu().numpy()
                # output at offset j predicts global position t0 + j + 1
                targets = t0 + 1 + np.arange(window.shape[1])
                mask = np.isin(targets, steps)
                if mask.any():
                    dump_left = _collect(
                        probs[mask], chunks, kept_full, dump_left, config.m_groups
                    )

    rows = np.concatenate(chunks, axis=0)
    out = _renormalize(rows)
    write_pseq(out, output_path, dtype=config.dtype)
    full = np.concatenate(kept_full, axis=0) if kept_full else None
    return ExtractReport(
        n_steps=out.shape[0],
        dim=out.shape[1],
        vocab_size=vocab,
        n_tokens=len(ids),
        first_step=first,
        full_rows=full,
    )


def _collect(probs, chunks, kept_full, dump_left, m_groups) -> int:
    """Reduce one batch into chunks; siphon off full rows while any are owed."""
    if dump_left > 0:
        kept_full.append(probs[:dump_left].copy())
        dump_left = max(0, dump_left - probs.shape[0])
    chunks.append(_reduce_rows(probs, m_groups))
    return dump_left
