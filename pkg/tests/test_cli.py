import csv
import os
from unittest.mock import patch

import pandas as pd
import pytest

from cli import (
    FIGURE_GRID,
    RunConfig,
    build_config,
    cmd_converge,
    cmd_fbm,
    cmd_history,
    cmd_simulate,
    cmd_transform,
    parse_config_file,
    parse_n_list,
)
from errors import ConfigError, DomainError, VerificationError
from fbm_gen import generate_fbm
from main import build_parser, main
from skew_transform import SkewParams
from solver import convergence_study


@pytest.fixture
def no_images():
    with patch("cli.export_figure", side_effect=lambda fig, path: path) as mock_export:
        yield mock_export


@pytest.fixture
def config(tmp_path):
    return RunConfig(N=64, output_dir=str(tmp_path / "out"), log_dir=str(tmp_path / "logs"),
                     n_list=(8, 16, 32, 64), monitoring=False)


def write_config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_parse_n_list():
    assert parse_n_list("8,16, 32,") == (8, 16, 32)
    with pytest.raises(ValueError):
        parse_n_list("8,x")


def test_run_config_validation():
    with pytest.raises(DomainError):
        RunConfig(H=0.3)
    with pytest.raises(DomainError):
        RunConfig(generator="hosking")
    with pytest.raises(DomainError):
        RunConfig(n_list=(8, 0))
    assert RunConfig().grid.N == 4096


def test_parse_config_file(tmp_path):
    path = write_config(tmp_path, "# driver\nhurst = 0.8\nalpha=0.3  # skew\n\nn_list = 8,16,32,64\n"
                                  "disable-monitoring = yes\nout = results\n")
    values = parse_config_file(path)
    assert values == {"H": 0.8, "alpha": 0.3, "n_list": (8, 16, 32, 64), "monitoring": False,
                      "output_dir": "results"}


def test_step_count_keys(tmp_path):
    assert parse_config_file(write_config(tmp_path, "N = 64\n")) == {"N": 64}
    assert parse_config_file(write_config(tmp_path, "steps = 128\n")) == {"N": 128}
    # lower-case n is the mollification index, not a step count
    with pytest.raises(ConfigError) as info:
        parse_config_file(write_config(tmp_path, "n = 10\n"))
    assert info.value.field == "n"


def test_config_errors_name_line_and_field(tmp_path):
    with pytest.raises(ConfigError) as info:
        parse_config_file(write_config(tmp_path, "alpha = 0.3\nsteps = many\n"))
    assert info.value.line == 2
    assert info.value.field == "steps"
    assert str(info.value).startswith("line 2, field 'steps'")

    with pytest.raises(ConfigError) as info:
        parse_config_file(write_config(tmp_path, "colour = blue\n"))
    assert info.value.field == "colour"

    with pytest.raises(ConfigError) as info:
        parse_config_file(write_config(tmp_path, "alpha 0.3\n"))
    assert info.value.line == 1

    with pytest.raises(ConfigError):
        parse_config_file(str(tmp_path / "missing.cfg"))


def test_flags_override_config_file(tmp_path):
    path = write_config(tmp_path, "hurst = 0.8\nalpha = 0.3\n")
    args = build_parser().parse_args(["simulate", "--config", path, "--alpha", "0.2", "--disable-monitoring"])
    config = build_config(args)
    assert config.H == 0.8
    assert config.alpha == 0.2
    assert config.N == 4096
    assert config.monitoring is False


def test_fbm_command_is_repeatable(config, no_images, capsys):
    files = cmd_fbm(config)
    assert [os.path.basename(f) for f in files] == ["fbm_H0.75_seed2024.csv", "fbm_H0.75_seed2024.svg"]
    with open(files[0], "rb") as f:
        first = f.read()
    cmd_fbm(config)
    with open(files[0], "rb") as f:
        assert f.read() == first
    assert "Wrote" in capsys.readouterr().out


def test_fbm_brownian_limit(tmp_path, no_images, capsys):
    cmd_fbm(RunConfig(H=0.5, N=32, output_dir=str(tmp_path), monitoring=False))
    assert "H = 0.5: limit case" in capsys.readouterr().out


def test_simulate_at_alpha_half_has_no_gap(tmp_path, no_images, capsys):
    config = RunConfig(alpha=0.5, N=64, output_dir=str(tmp_path), monitoring=False)
    files = cmd_simulate(config)
    assert "Max |mollified - exact| over n in [8, 16, 32, 64, 128]: 0" in capsys.readouterr().out
    frame = pd.read_csv(files[0])
    assert list(frame.columns) == ["t", "B", "x_exact", "x_mollified_n8", "x_mollified_n16",
                                   "x_mollified_n32", "x_mollified_n64", "x_mollified_n128"]


def test_simulate_figure_grid(config, no_images):
    files = cmd_simulate(config, figure_grid=True)
    assert len(files) == 2 * len(FIGURE_GRID) + 2
    index = pd.read_csv(os.path.join(config.output_dir, "figure_grid.csv"))
    assert len(index) == 9
    assert list(index.columns) == ["H", "alpha", "csv", "figure", "max_mollified_gap"]
    assert index.loc[index["alpha"] == 0.5, "max_mollified_gap"].eq(0.0).all()


def test_converge_degenerate(tmp_path, no_images, capsys):
    cmd_converge(RunConfig(alpha=0.5, N=64, output_dir=str(tmp_path), monitoring=False))
    out = capsys.readouterr().out
    assert "degenerate: zero error" in out
    assert "slope" not in out


def test_converge_reports_slope(config, no_images, capsys):
    files = cmd_converge(config)
    out = capsys.readouterr().out
    assert "slope:" in out
    frame = pd.read_csv(files[0])
    assert frame["n"].tolist() == [8, 16, 32, 64]


def test_converge_uses_the_configured_seed(config, no_images):
    files = cmd_converge(config)
    assert os.path.basename(files[0]) == f"converge_H0.75_alpha0.4_seed{config.seed}.csv"
    B = generate_fbm(config.H, config.grid, config.seed, config.generator)
    expected = convergence_study(SkewParams(config.alpha), config.x0, B, config.n_list)
    frame = pd.read_csv(files[0])
    assert frame["sup_error"].tolist() == pytest.approx([err for _, err in expected.entries], rel=1e-12)


def test_transform_command(config, no_images):
    files = cmd_transform(config)
    assert [os.path.basename(f) for f in files] == [
        "transform_alpha0.4_n8.csv", "transform_alpha0.4_n8_sigma.svg", "transform_alpha0.4_n8_lambda.svg",
    ]
    table = pd.read_csv(files[0])
    assert list(table.columns) == ["x", "sigma", "sigma_n", "lambda", "lambda_n"]
    assert (table["x"] == -0.125).any()


def test_history_without_runs(config, capsys):
    summary = cmd_history(config)
    assert summary["total_runs"] == 0


def test_main_short_n_list_is_usage_error(tmp_path, no_images):
    code = main(["converge", "--n-list", "8,16,32", "--steps", "64", "--out", str(tmp_path),
                 "--disable-monitoring"])
    assert code == 2


def test_main_bad_config_is_usage_error(tmp_path):
    path = write_config(tmp_path, "alpha = 2\n")
    assert main(["fbm", "--config", path, "--disable-monitoring"]) == 2
    assert main(["fbm", "--bogus"]) == 2
    assert main(["fbm", "--help"]) == 0


def test_main_unwritable_output_is_io_error(tmp_path, no_images):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = main(["fbm", "--steps", "16", "--out", str(blocker / "sub"), "--disable-monitoring"])
    assert code == 3


def test_main_verification_failure(tmp_path):
    with patch("main.cmd_verify", return_value=1):
        assert main(["verify", "--disable-monitoring"]) == 1
    with patch("main.cmd_simulate", side_effect=VerificationError("identity violated")):
        assert main(["simulate", "--disable-monitoring"]) == 1


def test_main_records_runs_in_ledger(tmp_path, no_images, capsys):
    log_dir = str(tmp_path / "logs")
    code = main(["fbm", "--steps", "16", "--out", str(tmp_path / "out"), "--log-dir", log_dir])
    assert code == 0
    with open(os.path.join(log_dir, "runs.csv")) as f:
        rows = list(csv.DictReader(f))
    assert rows[0]["command"] == "fbm"
    assert rows[0]["N"] == "16"

    assert main(["history", "--log-dir", log_dir]) == 0
    assert "Runs in the last 7 days: 1" in capsys.readouterr().out
