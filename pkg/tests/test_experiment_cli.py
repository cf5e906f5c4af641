import json

from dimer_model import DimerConfig
from experiment_cli import EXIT_ERROR, EXIT_OK, run_cli
from oracle_suite import column_offset_pair

SMALL_TORUS = ["--set", "geometry.W=4", "--set", "geometry.H=4", "--set", "analysis.K=1", "--set", "analysis.L=1"]


def _run(tmp_path, *argv):
    return run_cli(list(argv) + ["--output", str(tmp_path), "--quiet"])


def test_transfer(tmp_path, capsys):
    assert _run(tmp_path, "transfer", "--lengths", "2", "4") == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("beta,")
    assert (tmp_path / "transfer.csv").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "transfer"


def test_unknown_key_exits_with_error(tmp_path, capsys):
    assert _run(tmp_path, "transfer", "--set", "model.nope=1") == EXIT_ERROR
    assert "nope" in capsys.readouterr().err


def test_enumerate(tmp_path):
    argv = ["enumerate", "--set", "geometry.W=3", "--set", "geometry.H=3", "--set", "geometry.bc=vacant",
            "--set", "analysis.K=1", "--set", "analysis.L=1", "--set", "analysis.N=3"]
    assert _run(tmp_path, *argv) == EXIT_OK
    rows = [json.loads(line) for line in (tmp_path / "enumerate.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 1 and rows[0]["configs"] > 1


def test_enumerate_guardrail(tmp_path):
    assert _run(tmp_path, "enumerate") == EXIT_ERROR


def test_sample_is_reproducible(tmp_path):
    argv = ["sample", *SMALL_TORUS, "--set", "sampler.sweeps=20", "--set", "sampler.burn_in=5"]
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run(first, *argv) == EXIT_OK
    assert _run(second, *argv) == EXIT_OK
    assert (first / "chain_0.jsonl").read_bytes() == (second / "chain_0.jsonl").read_bytes()
    assert (first / "chain_0_final.cfg").read_bytes() == (second / "chain_0_final.cfg").read_bytes()


def test_sample_needs_a_torus(tmp_path):
    assert _run(tmp_path, "sample", *SMALL_TORUS, "--set", "geometry.bc=vacant") == EXIT_ERROR


def test_analyze_needs_files(tmp_path):
    assert _run(tmp_path, "analyze") == EXIT_ERROR


def test_verify_oracle(tmp_path, capsys):
    assert _run(tmp_path, "verify", "--suite", "oracle", "--quick") == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    assert (tmp_path / "verify.jsonl").exists()


def test_disagree_on_files(tmp_path):
    pair = column_offset_pair()
    paths = []
    for name, cfg in (("sigma.cfg", pair.sigma), ("sigma_prime.cfg", pair.sigma_prime)):
        path = tmp_path / name
        path.write_text(cfg.to_text(), encoding="utf-8")
        paths.append(str(path))
    assert DimerConfig.from_text((tmp_path / "sigma.cfg").read_text(encoding="utf-8")) == pair.sigma
    out = tmp_path / "out"
    argv = ["disagree", "--pair", *paths, "--set", "geometry.W=12", "--set", "geometry.H=32",
            "--set", "sealing.c_scale=2"]
    assert _run(out, *argv) == EXIT_OK
    summary = json.loads((out / "disagree_summary.json").read_text(encoding="utf-8"))
    assert summary["violations"] == 0
    assert summary["pairs"] == 1
    assert summary["max_diameter"] == 7


def test_malformed_configuration_file_exits_with_error(tmp_path, capsys):
    for n, body in enumerate(("8 8 PERIODIC\nfoo bar\n", "8 8 PERIODIC\n1\n", "eight 8 PERIODIC\n")):
        path = tmp_path / f"bad_{n}.cfg"
        path.write_text(body, encoding="utf-8")
        assert _run(tmp_path / "out", "analyze", str(path)) == EXIT_ERROR
        err = capsys.readouterr().err
        assert "model error" in err and "Traceback" not in err
