"""Command line for probability-sequence extraction.

Reads a text file, runs a causal language model over it with a trailing
context window, and writes the modulo-reduced next-token distributions
as a PSEQ file (plus a JSON sidecar echoing the configuration).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .extract import ExtractConfig, ExtractionError, extract


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseq-extract", description=__doc__.split("\n")[0])
    p.add_argument("--model", required=True, help="model identifier or local path")
    p.add_argument("--input", required=True, help="UTF-8 text file")
    p.add_argument("-o", "--output", required=True, help="PSEQ output path")
    p.add_argument("--context-length", type=int, default=512)
    p.add_argument("--skip-prefix-tokens", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--m-groups", type=int, default=1000)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    p.add_argument("--mode", choices=["exact", "fast"], default="exact")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    config = ExtractConfig(
        model=args.model,
        context_length=args.context_length,
        skip_prefix_tokens=args.skip_prefix_tokens,
        max_steps=args.max_steps,
        m_groups=args.m_groups,
        dtype=args.dtype,
        mode=args.mode,
        batch_size=args.batch_size,
        device=args.device,
    )
    print(json.dumps({"config": vars(args)}), file=sys.stderr)
    try:
        text = Path(args.input).read_text(encoding="utf-8")
        report = extract(text, config, args.output)
    except (ExtractionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sidecar = {
        "source": "pseq-extract",
        "model": args.model,
        "n_steps": report.n_steps,
        "dim": report.dim,
        "vocab_size": report.vocab_size,
        "n_tokens": report.n_tokens,
        "first_step": report.first_step,
        "config": vars(args),
    }
    Path(str(args.output) + ".json").write_text(json.dumps(sidecar, indent=2))
    print(
        f"wrote {report.n_steps}x{report.dim} rows to {args.output} "
        f"(vocab {report.vocab_size}, {report.n_tokens} tokens)",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
