# app/test/routes/test_cli.py

import json

import pytest
from click.testing import CliRunner

from app.main import cli


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args):
    return runner.invoke(cli, list(args), catch_exceptions=False)


def test_help_lists_every_subcommand(runner):
    result = _invoke(runner, "--help")
    assert result.exit_code == 0
    for name in ("split-demo", "pipeline", "attack", "ratio", "id-collision", "alpha-sweep", "scaling"):
        assert name in result.output


def test_unknown_subcommand_fails_with_usage(runner):
    result = runner.invoke(cli, ["bogus"])
    assert result.exit_code != 0
    assert "Usage" in result.output


def test_unknown_flag_fails(runner):
    result = runner.invoke(cli, ["pipeline", "--bogus"])
    assert result.exit_code != 0


def test_split_demo_round_trips(runner):
    result = _invoke(runner, "split-demo", "--items", "3,7", "--seed", "1")
    assert result.exit_code == 0
    assert "shares sum to mask: yes" in result.output
    assert "reconstruction: [3, 7]" in result.output


def test_split_demo_rejects_bad_config(runner):
    result = runner.invoke(cli, ["split-demo", "--items", "1,2,3", "--n-max", "5", "--n-item", "10"])
    assert result.exit_code != 0
    assert "n_max" in result.output


def test_pipeline_synthetic_run(runner, tmp_path):
    out = tmp_path / "run"
    result = _invoke(runner, "pipeline", "--synthetic", "30", "--n-item", "200", "--n-max", "10",
                     "--splits", "5", "--k", "5", "--alpha", "0.9", "--seed", "1",
                     "--out-dir", str(out), "--dump-log")

    assert result.exit_code == 0, result.output
    assert "fidelity: OK" in result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "pipeline"
    assert manifest["seed"] == 1
    assert manifest["source"] == "synthetic:30"
    lines = (out / "pipeline.csv").read_text().splitlines()
    assert lines[0].startswith("phase,total_bytes")
    assert [line.split(",")[0] for line in lines[1:]] == ["upload", "download"]
    assert (out / "messages.csv").read_text().startswith("round,phase,from,to,vid,bytes\n")


def test_pipeline_outputs_are_byte_identical(runner, tmp_path):
    args = ["pipeline", "--synthetic", "20", "--n-item", "200", "--n-max", "10", "--splits", "4",
            "--k", "3", "--seed", "5", "--dump-log"]
    _invoke(runner, *args, "--out-dir", str(tmp_path / "a"))
    _invoke(runner, *args, "--out-dir", str(tmp_path / "b"))
    for name in ("pipeline.csv", "messages.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pipeline_reads_interaction_file(runner, tmp_path):
    data = tmp_path / "users.txt"
    data.write_text("".join(f"{i} {i + 1}\n" for i in range(1, 11)), encoding="utf-8")
    result = _invoke(runner, "pipeline", "--input", str(data), "--n-item", "40", "--n-max", "3",
                     "--splits", "3", "--k", "2", "--out-dir", str(tmp_path / "out"))
    assert result.exit_code == 0, result.output
    assert "fidelity: OK" in result.output


def test_pipeline_parse_error_cites_line(runner, tmp_path):
    data = tmp_path / "users.txt"
    data.write_text("1 2\n3 0\n", encoding="utf-8")
    result = runner.invoke(cli, ["pipeline", "--input", str(data), "--out-dir", str(tmp_path / "out")])
    assert result.exit_code != 0
    assert "line 2" in result.output


def test_pipeline_needs_exactly_one_source(runner, tmp_path):
    result = runner.invoke(cli, ["pipeline", "--out-dir", str(tmp_path)])
    assert result.exit_code != 0
    assert "--input or --synthetic" in result.output


def test_flags_override_config_file(runner, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("synthetic=12\nn_item=200\nn_max=10\nsplits=3\nk=2\nseed=4\n", encoding="utf-8")
    out = tmp_path / "out"
    result = _invoke(runner, "pipeline", "--config", str(config), "--seed", "9", "--out-dir", str(out))

    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["config"]["synthetic"] == 12
    assert manifest["config"]["splits"] == 3


def test_config_file_with_unknown_key_fails(runner, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("colour=blue\n", encoding="utf-8")
    result = runner.invoke(cli, ["pipeline", "--synthetic", "5", "--config", str(config)])
    assert result.exit_code != 0
    assert "Unknown key" in result.output


def test_id_collision_writes_results(runner, tmp_path):
    result = _invoke(runner, "id-collision", "--lengths", "1,6..7", "--users", "500", "--trials", "3",
                     "--out-dir", str(tmp_path))
    assert result.exit_code == 0, result.output
    assert "[PASS] id_len=7: no repetitions in any trial" in result.output
    assert (tmp_path / "id_collision.csv").exists()
    assert json.loads((tmp_path / "id_collision.json").read_text())["passed"] is True


def test_failed_check_exits_nonzero_unless_no_check(runner, tmp_path):
    # the cost optimum cannot fall near the top of a sweep that stops at 0.3
    args = ["alpha-sweep", "--alphas", "0.1,0.2,0.3", "--users", "10", "--n-item", "200", "--n-max", "10",
            "--splits", "3", "--k", "3", "--trials", "1", "--out-dir", str(tmp_path)]
    failed = runner.invoke(cli, args)
    assert failed.exit_code == 1
    assert "[FAIL] total cost minimised near the top of the sweep" in failed.output

    ignored = _invoke(runner, *args, "--no-check")
    assert ignored.exit_code == 0


def test_alpha_sweep_names_argmin(runner, tmp_path):
    result = _invoke(runner, "alpha-sweep", "--alphas", "0.5,0.9", "--users", "15", "--n-item", "200",
                     "--n-max", "10", "--splits", "4", "--k", "3", "--trials", "1",
                     "--out-dir", str(tmp_path), "--no-check")
    assert result.exit_code == 0, result.output
    assert "argmin_alpha:" in result.output
    assert (tmp_path / "alpha_sweep.csv").exists()


def test_bad_list_flag_is_a_usage_error(runner):
    result = runner.invoke(cli, ["alpha-sweep", "--alphas", "0.5,,x"])
    assert result.exit_code == 2
