import json
import subprocess
import sys

import pytest

from heavytraffic.cli import main, read_samples

ENV1 = {"HTR_THREADS": "1"}


def run(capsys, *argv, environ=None):
    code = main(list(argv), environ=environ if environ is not None else {})
    out, err = capsys.readouterr()
    return code, out, err


def test_coeff_dump(capsys):
    code, out, _ = run(capsys, "coeff-dump", "--gamma", "0.5", "--n", "4")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "i,g_i,partial_sum"
    assert lines[1:] == ["0,1.0,1.0", "1,0.5,1.5", "2,0.375,1.875", "3,0.3125,2.1875"]


def test_scaling_table(capsys):
    code, out, _ = run(capsys, "scaling-table", "--points", "3", "--t-max", "1000")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "t,g_partial,abs_quantile,k" and len(rows) == 4


def test_scaling_table_divergent(capsys):
    code, out, err = run(capsys, "scaling-table", "--alpha", "1.3", "--gamma", "0.5")
    assert code == 2
    assert "infinite in probability" in err and out == ""


def test_boundary_refused(capsys):
    code, _, err = run(capsys, "simulate-limit", "--alpha", "1.25", "--gamma", "0.8", "--seed", "1")
    assert code == 2 and "boundary" in err


def test_simulate_path_jsonl(capsys, tmp_path):
    out = tmp_path / "pre.jsonl"
    code, _, _ = run(capsys, "simulate-path", "--a", "0.25", "--replicates", "5", "--seed", "3", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    header = json.loads(lines[0])["header"]
    assert header["kind"] == "prelimit" and header["seed"] == 3
    assert header["meta"]["scaled"] is True
    rows = [json.loads(x) for x in lines[1:]]
    assert [r["r"] for r in rows] == list(range(5))
    assert all(r["value"] >= 0 and isinstance(r["aux"], int) for r in rows)
    s = read_samples(out)
    assert len(s) == 5 and s.params["gamma"] == 0.9


def test_simulate_path_csv(capsys):
    code, out, _ = run(capsys, "simulate-path", "--a", "0.25", "--replicates", "3", "--seed", "3", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "r,value,aux" and len(lines) == 4


def test_threads_do_not_change_output(capsys, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    base = ["simulate-path", "--a", "0.25", "--replicates", "9", "--seed", "12"]
    assert run(capsys, *base, "--out", str(a), environ={"HTR_THREADS": "1"})[0] == 0
    assert run(capsys, *base, "--threads", "1", "--out", str(b), environ={"HTR_THREADS": "3"})[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_bad_thread_env(capsys):
    code, _, err = run(capsys, "simulate-path", "--a", "0.25", "--seed", "1", environ={"HTR_THREADS": "many"})
    assert code == 1 and "HTR_THREADS" in err


def test_seed_generated_and_reported(capsys):
    code, out, err = run(capsys, "simulate-path", "--a", "0.25", "--replicates", "2")
    assert code == 0
    seed = json.loads(out.splitlines()[0])["header"]["seed"]
    assert f"using seed {seed}" in err


def test_divergent_path(capsys):
    code, _, err = run(capsys, "simulate-path", "--alpha", "1.3", "--gamma", "0.5", "--a", "0.1", "--seed", "1")
    assert code == 2 and "infinite in probability" in err
    code, out, _ = run(capsys, "simulate-path", "--alpha", "1.3", "--gamma", "0.5", "--a", "0.1",
                       "--seed", "1", "--horizon", "300", "--replicates", "2")
    assert code == 0
    assert json.loads(out.splitlines()[0])["header"]["meta"]["scaled"] is False


def test_missing_drift(capsys):
    code, _, err = run(capsys, "simulate-path", "--seed", "1")
    assert code == 1 and "drift" in err


def test_usage_error_exit_code(capsys):
    code = None
    with pytest.raises(SystemExit) as exc:
        main(["simulate-path", "--no-such-flag"], environ={})
    code = exc.value.code
    capsys.readouterr()
    assert code == 1


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("model: {gamma: 0.5}\n")
    code, out, _ = run(capsys, "coeff-dump", "--config", str(cfg), "--n", "2")
    assert code == 0 and out.splitlines()[2] == "1,0.5,1.5"
    cfg.write_text("model: {gama: 0.5}\n")
    code, _, err = run(capsys, "coeff-dump", "--config", str(cfg))
    assert code == 1 and "model.gama" in err
    code, _, _ = run(capsys, "coeff-dump", "--config", str(tmp_path / "absent.yaml"))
    assert code == 1


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("model: {gamma: 0.5}\n")
    code, out, _ = run(capsys, "coeff-dump", "--config", str(cfg), "--gamma", "0.7", "--n", "2")
    assert out.splitlines()[2] == "1,0.7,1.7"


@pytest.fixture(scope="module")
def sample_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("samples")
    pre, lim = d / "pre.jsonl", d / "lim.jsonl"
    assert main(["-q", "simulate-path", "--a", "0.25", "--replicates", "60", "--seed", "1", "--out", str(pre)],
                environ=ENV1) == 0
    assert main(["-q", "simulate-limit", "--replicates", "300", "--seed", "2", "--out", str(lim)],
                environ=ENV1) == 0
    return pre, lim


def test_simulate_limit_header(sample_files):
    s = read_samples(sample_files[1])
    head = json.loads(sample_files[1].read_text().splitlines()[0])["header"]
    assert head["kind"] == "limit" and head["meta"]["eps"] > 0 and head["meta"]["T"] > 1
    assert len(s) == 300 and all(v >= 0 for v in s.values)


def test_compare(capsys, sample_files, tmp_path):
    pre, lim = sample_files
    csv = tmp_path / "cmp.csv"
    code, out, _ = run(capsys, "compare", str(pre), str(lim), "--n-boot", "50", "--out", str(csv))
    assert code == 0
    assert "KS distance" in out
    assert csv.read_text().startswith("prob,value_a")
    # identical files always pass, against themselves
    code, out, _ = run(capsys, "compare", str(lim), str(lim), "--n-boot", "20", "--strict")
    assert code == 0 and "PASS" in out


def test_compare_strict_failure(capsys, sample_files, tmp_path):
    pre, lim = sample_files
    shifted = tmp_path / "shifted.jsonl"
    lines = lim.read_text().splitlines()
    body = [json.dumps(dict(json.loads(x), value=json.loads(x)["value"] + 100.0)) for x in lines[1:]]
    shifted.write_text("\n".join([lines[0]] + body) + "\n")
    code, out, _ = run(capsys, "compare", str(lim), str(shifted), "--n-boot", "20", "--strict")
    assert code == 3 and "FAIL" in out


def test_compare_mismatch_and_bad_file(capsys, sample_files, tmp_path):
    pre, _ = sample_files
    other = tmp_path / "other.jsonl"
    assert main(["-q", "simulate-limit", "--gamma", "0.85", "--replicates", "5", "--seed", "2", "--out", str(other)],
                environ=ENV1) == 0
    code, _, err = run(capsys, "compare", str(pre), str(other), "--n-boot", "10")
    assert code == 1 and "gamma" in err
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    assert run(capsys, "compare", str(bad), str(other))[0] == 1


def test_rate_check(capsys, tmp_path):
    out = tmp_path / "rate.csv"
    code, _, err = run(capsys, "rate-check", "--a-ladder", "0.25,0.2,0.16", "--replicates", "20",
                       "--seed", "4", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "a,horizon,scale,median_scaled,median_sup" and len(lines) == 4
    assert "growth exponent" in err


def test_rate_check_work_guard(capsys):
    code, _, err = run(capsys, "rate-check", "--a-ladder", "0.25,0.16,0.08", "--replicates", "100",
                       "--seed", "4", "--max-work", "1e6")
    assert code == 1 and "--max-work" in err


def test_verify_only(capsys):
    code, out, _ = run(capsys, "verify", "--only", "5")
    assert code == 0 and out.startswith("PASS")
    assert run(capsys, "verify", "--only", "99")[0] == 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "heavytraffic.cli", "scaling-table", "--alpha", "1.3",
                          "--gamma", "0.5"], capture_output=True, text=True)
    assert res.returncode == 2
    assert res.stdout == "" and "infinite in probability" in res.stderr
