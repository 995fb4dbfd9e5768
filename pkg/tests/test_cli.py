import json

import numpy as np
import pytest

from manidim.cli import main
from manidim.pseq import read_header, read_pseq, write_pseq


def run(argv):
    return main([str(a) for a in argv])


def test_simulate_then_analyze_ba(tmp_path, capsys):
    out = tmp_path / "ba.pseq"
    assert run(["simulate", "ba", "--n", 1500, "--seed", 7, "-o", out]) == 0
    sidecar = json.loads((tmp_path / "ba.pseq.json").read_text())
    assert sidecar["process"] == "ba"
    assert sidecar["recommended_filter"]["eta"] == 1.0
    est_path = tmp_path / "est.json"
    curve_path = tmp_path / "curve.tsv"
    code = run(
        ["analyze", out, "--eta", 1.0, "--m-groups", 100, "-o", est_path, "--curve-out", curve_path]
    )
    assert code == 0
    est = json.loads(est_path.read_text())
    assert set(est) == {
        "nu_hat", "intercept", "r_squared", "fit_lo", "fit_hi",
        "n_points", "n_pairs", "metric", "eta", "m_groups", "seed",
    }
    assert est["n_pairs"] == 1500 * 1499 // 2
    assert est["seed"] == 7  # picked up from the sidecar
    assert 1.0 < est["nu_hat"] < 3.5
    eps = []
    for line in curve_path.read_text().splitlines():
        e, c = line.split("\t")
        eps.append(float(e))
        assert 0.0 < float(c) <= 1.0
    assert eps == sorted(eps)


def test_analyze_stdout_and_config_echo(tmp_path, capsys):
    out = tmp_path / "u.pseq"
    assert run(["simulate", "uniform", "--n", 300, "--k", 20, "--seed", 1, "-o", out]) == 0
    capsys.readouterr()
    assert run(["analyze", out, "--eta", 1.0, "--no-reduce", "--min-retained", 10]) == 0
    captured = capsys.readouterr()
    est = json.loads(captured.out)
    assert est["m_groups"] is None
    cfg = json.loads(captured.err.splitlines()[0])
    assert cfg["config"]["command"] == "analyze"


def test_analyze_reruns_bit_identically(tmp_path):
    out = tmp_path / "n.pseq"
    run(["simulate", "uniform", "--n", 200, "--k", 15, "--seed", 3, "-o", out])
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    run(["analyze", out, "--eta", 1.0, "--no-reduce", "--min-retained", 10, "-o", a])
    run(["analyze", out, "--eta", 1.0, "--no-reduce", "--min-retained", 10, "-o", b])
    assert a.read_text() == b.read_text()


def test_analyze_filter_starvation_is_data_error(tmp_path, capsys):
    rows = np.tile([0.9, 0.1], (200, 1))
    path = tmp_path / "peaked.pseq"
    write_pseq(rows, path)
    assert run(["analyze", path, "--eta", 0.5]) == 2
    err = capsys.readouterr().err
    assert "filter" in err.lower() or "retained" in err.lower()


def test_analyze_rejects_invalid_rows(tmp_path):
    path = tmp_path / "bad.pseq"
    write_pseq(np.array([[0.5, 0.6]] * 150), path, dtype="f64")
    assert run(["analyze", path, "--eta", 1.0]) == 2


def test_validate_reports_rows(tmp_path, capsys):
    path = tmp_path / "mix.pseq"
    write_pseq(np.array([[0.5, 0.5], [0.7, 0.7], [1.0, 0.0]]), path, dtype="f64")
    assert run(["validate", path]) == 2
    out = capsys.readouterr().out
    assert "row 1" in out
    ok = tmp_path / "ok.pseq"
    write_pseq(np.array([[0.5, 0.5]]), ok)
    assert run(["validate", ok]) == 0


def test_validate_bad_magic_is_data_error(tmp_path, capsys):
    path = tmp_path / "junk.pseq"
    path.write_bytes(b"JUNKJUNKJUNKJUNK" + b"\x00" * 32)
    assert run(["validate", path]) == 2


def test_reduce_subcommand(tmp_path):
    src = tmp_path / "src.pseq"
    dst = tmp_path / "dst.pseq"
    rng = np.random.default_rng(5)
    write_pseq(rng.dirichlet(np.ones(12), size=30), src)
    assert run(["reduce", src, "-o", dst, "--m-groups", 5]) == 0
    header = read_header(dst)
    assert (header.n_steps, header.dim) == (30, 5)
    np.testing.assert_allclose(read_pseq(dst).sum(axis=1), 1.0, atol=1e-9)


def test_jsonl_input_accepted(tmp_path, capsys):
    path = tmp_path / "rows.jsonl"
    rows = np.random.default_rng(8).dirichlet(np.ones(4), size=150)
    path.write_text("\n".join(json.dumps(list(r)) for r in rows))
    assert run(["analyze", path, "--eta", 1.0, "--no-reduce"]) == 0


def test_usage_error_exit_code():
    assert run(["analyze"]) == 1
    assert run(["simulate", "nosuch", "--n", 10, "-o", "x"]) == 1


def test_missing_file_is_data_error(tmp_path):
    assert run(["analyze", tmp_path / "absent.pseq"]) == 2


def test_verify_passes_and_prints_lines(capsys):
    assert run(["verify", "--seed", 1]) == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) == 9
    assert all(ln.startswith("PASS") for ln in lines)


def test_curve_subcommand_stdout(tmp_path, capsys):
    out = tmp_path / "d.pseq"
    run(["simulate", "dirichlet", "--n", 150, "--k", 30, "--alpha-total", 30, "--seed", 2, "-o", out])
    capsys.readouterr()
    assert run(["curve", out, "--eta", 1.0, "--no-reduce", "--min-retained", 10]) == 0
    body = capsys.readouterr().out
    assert all("\t" in ln for ln in body.splitlines() if ln)


def test_simulate_markov_chain_json(tmp_path):
    chain = {"transition": [[0.5, 0.5], [0.2, 0.8]], "initial": [1.0, 0.0]}
    spec = tmp_path / "chain.json"
    spec.write_text(json.dumps(chain))
    out = tmp_path / "mk.pseq"
    assert run(["simulate", "markov", "--n", 500, "--seed", 4, "--chain-json", spec, "-o", out]) == 0
    rows = read_pseq(out)
    uniq = np.unique(rows, axis=0)
    assert uniq.shape[0] <= 2  # rows are exact transition rows


def test_simulate_dirichlet_head_tail(tmp_path):
    out = tmp_path / "dh.pseq"
    code = run(
        ["simulate", "dirichlet", "--n", 50, "--k", 100, "--alpha-head", "3,0.2",
         "--alpha-tail", "2.2e-5", "--seed", 5, "-o", out]
    )
    assert code == 0
    rows = read_pseq(out)
    assert rows.shape == (50, 100)
    # the heavy first concentration dominates most rows
    assert (rows.argmax(axis=1) == 0).mean() > 0.5


def test_simulate_fapa_requires_kappa_range(tmp_path):
    assert run(["simulate", "fapa", "--n", 50, "--kappa", 2.0, "-o", tmp_path / "f.pseq"]) == 2
