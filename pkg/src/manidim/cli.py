"""Command-line entry point.

Subcommands: ``simulate`` (write a synthetic trajectory as PSEQ),
``analyze`` (dimension estimate JSON plus optional curve TSV),
``curve`` (correlation curve only), ``validate`` (per-row invariant
report), ``reduce`` (rewrite with modulo-grouped rows) and ``verify``
(run the theorem suite).  Exit codes: 0 success, 1 usage, 2 data or
format error, 3 verification failure.

Every run prints its full effective configuration as one JSON line on
stderr; re-running with that configuration reproduces the outputs
bit-identically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import corrdim, pseq, processes, theory
from .prob import FilterSpec, InvalidDistributionError, validate as validate_rows
from .reduce import ReductionSpec, project_sequence

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

# eta=0.5 matches the default used for language-like data; growth and
# noise trajectories are analyzed unfiltered (see simulate sidecars).
DEFAULT_ETA = 0.5
DEFAULT_M_GROUPS = 1000
DEFAULT_BINS = 64


def _echo_config(args: argparse.Namespace):
    cfg = {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")}
    print(json.dumps({"config": cfg}, default=str), file=sys.stderr)


def _filter_from_args(args) -> FilterSpec | None:
    if (
        args.eta >= 1.0
        and args.entropy_min is None
        and args.entropy_max is None
        and args.argmax_word is None
    ):
        return None
    return FilterSpec(
        eta=args.eta,
        entropy_min=args.entropy_min,
        entropy_max=args.entropy_max,
        argmax_word=args.argmax_word,
    )


def _sidecar_for(process: str, args, k: int) -> dict:
    recommended = {
        "ba": {"eta": 1.0},
        "fapa": {"eta": 1.0},
        "markov": {"eta": 1.0},
        "uniform": {"eta": 1.0},
        "dirichlet": {"eta": 1.0, "entropy_min": 3.0},
    }[process]
    cfg = {
        k_: v
        for k_, v in vars(args).items()
        if k_ not in ("func",) and not k_.startswith("_")
    }
    return {"process": process, "dim": k, "config": cfg, "recommended_filter": recommended, "seed": args.seed}


def _cmd_simulate(args) -> int:
    proc = args.process
    if proc == "fapa" and args.kappa is None:
        raise ValueError("fapa requires --kappa")
    if proc == "markov" and args.chain_json is None:
        raise ValueError("markov requires --chain-json")
    if proc in ("ba", "fapa"):
        kappa = args.kappa if proc == "fapa" else None
        config = processes.GrowthNetConfig(
            n_steps=args.n, m0=args.m0, m=args.m, kappa=kappa, total_nodes=args.total_nodes
        )
        rows, _state = processes.gen_growth_net(config, seed=args.seed)
    elif proc == "uniform":
        rows = processes.gen_uniform_sphere_noise(k=args.k, n=args.n, seed=args.seed)
    elif proc == "dirichlet":
        if args.alpha_total is not None:
            alpha = np.full(args.k, args.alpha_total / args.k)
        else:
            alpha = np.full(args.k, args.alpha_tail)
        if args.alpha_head:
            head = [float(x) for x in args.alpha_head.split(",")]
            if len(head) > args.k:
                raise ValueError("alpha head longer than the vocabulary")
            alpha[: len(head)] = head
        spec = processes.DirichletSpec(alpha)
        rows, stats = processes.gen_dirichlet_iid(spec, n=args.n, seed=args.seed, return_stats=True)
        if stats["rows_resampled"]:
            print(f"resampled {stats['rows_resampled']} all-zero rows", file=sys.stderr)
    elif proc == "markov":
        with open(args.chain_json) as fh:
            raw = json.load(fh)
        chain = processes.MarkovChain(
            transition=np.asarray(raw["transition"]), initial=np.asarray(raw["initial"])
        )
        rows, _words = processes.gen_markov(chain, n=args.n, seed=args.seed)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(proc)

    pseq.write_pseq(rows, args.output, dtype=args.dtype)
    sidecar = _sidecar_for(proc, args, rows.shape[1])
    Path(str(args.output) + ".json").write_text(json.dumps(sidecar, indent=2, default=str))
    print(f"wrote {rows.shape[0]}x{rows.shape[1]} rows to {args.output}", file=sys.stderr)
    return EXIT_OK


def _load(args) -> np.ndarray:
    return pseq.read_sequence(
        args.input,
        tolerance=args.tolerance,
        renormalize_rows=getattr(args, "renormalize", False),
    )


def _seed_from_sidecar(args) -> int | None:
    if args.seed is not None:
        return args.seed
    side = Path(str(args.input) + ".json")
    if side.exists():
        try:
            return json.loads(side.read_text()).get("seed")
        except (json.JSONDecodeError, OSError):
            return None
    return None


def _run_estimate(args) -> corrdim.EstimateResult:
    rows = _load(args)
    region = None
    if args.fit_lo is not None or args.fit_hi is not None:
        if args.fit_lo is None or args.fit_hi is None:
            raise ValueError("provide both --fit-lo and --fit-hi or neither")
        region = (args.fit_lo, args.fit_hi)
    reduction = None if args.no_reduce else args.m_groups
    return corrdim.estimate(
        rows,
        filter_spec=_filter_from_args(args),
        reduction=reduction,
        metric=args.metric,
        n_bins=args.bins,
        region=region,
        min_retained=args.min_retained,
        n_threads=args.threads,
        validate=False,  # the reader already validated at its dtype tier
    )


def _cmd_analyze(args) -> int:
    result = _run_estimate(args)
    payload = pseq.estimate_json(
        result.estimate,
        n_pairs=result.histogram.n_pairs_total,
        metric=args.metric,
        eta=args.eta,
        m_groups=None if args.no_reduce else args.m_groups,
        seed=_seed_from_sidecar(args),
    )
    if args.output:
        Path(args.output).write_text(payload + "\n")
    else:
        print(payload)
    if args.curve_out:
        with open(args.curve_out, "w") as fh:
            pseq.write_curve_tsv(result.curve, fh)
    return EXIT_OK


def _cmd_curve(args) -> int:
    result = _run_estimate(args)
    if args.output:
        with open(args.output, "w") as fh:
            pseq.write_curve_tsv(result.curve, fh)
    else:
        pseq.write_curve_tsv(result.curve, sys.stdout)
    return EXIT_OK


def _cmd_validate(args) -> int:
    rows = pseq.read_sequence(args.input, validate=False)
    header_tol = (
        args.tolerance
        if args.tolerance is not None
        else (pseq.read_header(args.input).tolerance if not str(args.input).endswith(".jsonl") else 1e-9)
    )
    violations = validate_rows(rows, header_tol)
    if not violations:
        print(f"OK: {rows.shape[0]} rows, dim {rows.shape[1]}, tolerance {header_tol:g}")
        return EXIT_OK
    for v in violations:
        print(str(v))
    print(f"{len(violations)} violation(s) in {rows.shape[0]} rows")
    return EXIT_DATA


def _cmd_reduce(args) -> int:
    rows = _load(args)
    spec = ReductionSpec(m_groups=min(args.m_groups, rows.shape[1]), source_dim=rows.shape[1])
    out = project_sequence(rows, spec)
    pseq.write_pseq(out, args.output, dtype=args.dtype)
    print(f"wrote {out.shape[0]}x{out.shape[1]} rows to {args.output}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name: str, ok: bool, detail: str):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1

    worst = 0.0
    for _ in range(100):
        pair = theory.random_absorbing_pair(
            rng, n_words=int(rng.integers(2, 8)), rho=float(rng.uniform(0.1, 0.6)), same_matrix=True
        )
        worst = max(worst, abs(theory.distortion_rate(pair).ratio - 1.0))
    report("same-matrix-identity", worst < 1e-9, f"max |r-1| = {worst:.3e}, tol 1e-9")

    low = np.inf
    for _ in range(1000):
        pair = theory.random_absorbing_pair(
            rng, n_words=int(rng.integers(2, 8)), rho=float(rng.uniform(0.1, 0.6))
        )
        low = min(low, theory.distortion_rate(pair).ratio)
    report("marginalization-contracts", low >= 1.0 - 1e-9, f"min ratio = {low:.9f}, floor 1 - 1e-9")

    for rho in (0.25, 0.5):
        probe = theory.probe_distortion_limit(rho, seed=args.seed)
        ok = probe.final_ratio <= probe.bound + 0.05
        report(
            f"shrinking-limit rho={rho}",
            ok,
            f"final ratio {probe.final_ratio:.4f} <= bound {probe.bound:.4f} + 0.05 "
            f"(monotone={probe.monotone_decreasing})",
        )

    agree = 0
    worst_gap = 0.0
    for _ in range(100):
        pair = theory.random_absorbing_pair(
            rng, n_words=int(rng.integers(2, 4)), rho=float(rng.uniform(0.2, 0.6))
        )
        coeff = theory.cos_half_dfr_x(pair)
        partial, tail = theory.enumerate_closed_texts(pair, max_len=10)
        gap = abs(coeff - partial)
        worst_gap = max(worst_gap, gap - tail)
        agree += gap <= tail
    report(
        "resolvent-vs-enumeration",
        agree == 100,
        f"{agree}/100 within the geometric tail bound (worst excess {worst_gap:.2e})",
    )

    texts = tuple((w,) for w in range(3)) + ((0, 1), (1, 2), ())
    w1 = rng.random(len(texts))
    w2 = rng.random(len(texts))
    x1 = theory.ClosedTextDistribution(texts, w1 / w1.sum())
    x2 = theory.ClosedTextDistribution(texts, w2 / w2.sum())
    dev = max(
        theory.phi_linearity_check(x1, x2, alpha, vocab_size=4) for alpha in (0.0, 0.3, 0.7, 1.0)
    )
    report("marginalization-linearity", dev < 1e-12, f"max deviation {dev:.2e}, tol 1e-12")

    for gamma in (0.8, 1.0, 1.5):
        beta = (1e-3) ** (2.0 - gamma) / 25.0
        exp = theory.gamma_merge_experiment(
            gamma, beta=beta, n_contexts=20000, seed=args.seed
        )
        ok = abs(exp.gamma_after - gamma) <= 0.05
        report(
            f"merge-invariance gamma={gamma}",
            ok,
            f"fitted after-merge exponent {exp.gamma_after:.4f}, input {gamma}, tol 0.05",
        )

    return EXIT_OK if failures == 0 else EXIT_VERIFY


def _add_analysis_flags(p: argparse.ArgumentParser):
    p.add_argument("input", help="PSEQ (or .jsonl fixture) path")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA, help="max-probability threshold (1.0 disables)")
    p.add_argument("--entropy-min", type=float, default=None, help="min row entropy in bits")
    p.add_argument("--entropy-max", type=float, default=None, help="max row entropy in bits")
    p.add_argument("--argmax-word", type=int, default=None, help="select rows peaked at this word (inverts eta)")
    p.add_argument("--m-groups", type=int, default=DEFAULT_M_GROUPS, help="modulo-reduction group count")
    p.add_argument("--no-reduce", action="store_true", help="skip modulo reduction")
    p.add_argument("--metric", choices=["fisher-rao", "euclidean"], default="fisher-rao")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="distance histogram bin count")
    p.add_argument("--fit-lo", type=float, default=None, help="manual fit region lower edge")
    p.add_argument("--fit-hi", type=float, default=None, help="manual fit region upper edge")
    p.add_argument("--min-retained", type=int, default=100, help="minimum rows after filtering")
    p.add_argument("--threads", type=int, default=1, help="worker cap for pair histogramming")
    p.add_argument("--tolerance", type=float, default=None, help="row-sum tolerance override")
    p.add_argument("--renormalize", action="store_true", help="divide rows by their sums before use")
    p.add_argument("--seed", type=int, default=None, help="provenance seed echoed into the output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manidim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic trajectory")
    sim.add_argument("process", choices=["ba", "fapa", "dirichlet", "uniform", "markov"])
    sim.add_argument("--n", type=int, required=True, help="number of steps")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("-o", "--output", required=True)
    sim.add_argument("--dtype", choices=["f32", "f64"], default="f32")
    sim.add_argument("--m0", type=int, default=1, help="initial node count (ba/fapa)")
    sim.add_argument("--m", type=int, default=1, help="edges per arrival (ba/fapa)")
    sim.add_argument("--total-nodes", type=int, default=None, help="row width incl. unborn slots")
    sim.add_argument("--kappa", type=float, default=None, help="lowest-degree truncation ratio (fapa)")
    sim.add_argument("--k", type=int, default=50257, help="vocabulary size (dirichlet/uniform)")
    sim.add_argument("--alpha-total", type=float, default=None, help="symmetric concentration total (alpha_k = value/K)")
    sim.add_argument("--alpha-tail", type=float, default=1.0, help="fill value for unlisted alpha entries")
    sim.add_argument("--alpha-head", type=str, default=None, help="comma list overriding leading alpha entries")
    sim.add_argument("--chain-json", type=str, default=None, help="markov: JSON with transition+initial")
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="estimate the correlation dimension")
    _add_analysis_flags(ana)
    ana.add_argument("-o", "--output", default=None, help="estimate JSON path (default stdout)")
    ana.add_argument("--curve-out", default=None, help="also write the curve TSV here")
    ana.set_defaults(func=_cmd_analyze)

    cur = sub.add_parser("curve", help="emit the correlation-integral curve")
    _add_analysis_flags(cur)
    cur.add_argument("-o", "--output", default=None, help="TSV path (default stdout)")
    cur.set_defaults(func=_cmd_curve)

    val = sub.add_parser("validate", help="report per-row invariant violations")
    val.add_argument("input")
    val.add_argument("--tolerance", type=float, default=None)
    val.set_defaults(func=_cmd_validate)

    red = sub.add_parser("reduce", help="rewrite with modulo-grouped rows")
    red.add_argument("input")
    red.add_argument("-o", "--output", required=True)
    red.add_argument("--m-groups", type=int, default=DEFAULT_M_GROUPS)
    red.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    red.add_argument("--tolerance", type=float, default=None)
    red.set_defaults(func=_cmd_reduce)

    ver = sub.add_parser("verify", help="run the theorem suite")
    ver.add_argument("--seed", type=int, default=1)
    ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    _echo_config(args)
    try:
        return args.func(args)
    except (
        InvalidDistributionError,
        pseq.PseqFormatError,
        corrdim.EstimationError,
        theory.AbsorbingPairError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
