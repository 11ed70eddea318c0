"""
Tests for config loading, artifact writers, settings and the command-line driver.
"""

import json
from pathlib import Path
from unittest.mock import patch

import pandas as pd
import pytest
from pydantic import ValidationError

from config.settings import Settings
from src.cli.commands import COMMANDS
from src.cli.commands.base import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_VERIFICATION_FAILED,
    Artifacts,
    CommandContext,
    summarize,
)
from src.cli.main import build_parser, main, resolve_output_dir
from src.core.exceptions import ConfigError
from src.core.nonlinearity import NonlinearityFamily
from src.core.utils import export_series
from src.models.config import load_config, parse_config
from src.models.reports import ClauseResult, VerdictStatus, VerificationReport

FIXTURES = Path(__file__).resolve().parents[2] / "config" / "fixtures"
CONSTANT_CONFIG = FIXTURES / "constant.yaml"

SMALL_SEARCH = """\
nonlinearity:
  family: constant
  params: [1.0]
H0: 1.0
lam: 2.0
search:
  phase_grid: 2
  eps_grid: 1
  eps_signs: positive
  horizon: 10.0
  optimizer_budget: 0
  random_starts: 0
"""


def _write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestConfig:
    """YAML loading and validation."""

    def test_minimal_config(self, tmp_path):
        config = load_config(_write(tmp_path, "nonlinearity: {family: affine, params: [1, 2]}\n"
                                              "H0: 1.5\nlam: 3\n"))
        assert config.nonlinearity.family == NonlinearityFamily.AFFINE
        assert config.lam == 3.0
        assert config.bridge.S == [2.0, 4.0, 8.0]
        assert config.glue.K_max == 12

    def test_lambda_one_rejected(self):
        with pytest.raises(ConfigError) as info:
            parse_config({"nonlinearity": {"family": "constant", "params": [1]},
                          "H0": 1, "lam": 1.0})
        assert info.value.key_paths == ["lam"]
        assert "λ>1 required" in str(info.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config({"nonlinearity": {"family": "constant", "params": [1]},
                          "H0": 1, "lam": 2, "colour": "blue"})
        assert info.value.key_paths == ["colour"]

    def test_nested_key_path(self):
        with pytest.raises(ConfigError) as info:
            parse_config({"nonlinearity": {"family": "constant", "params": [1]},
                          "H0": 1, "lam": 2, "search": {"horizon": -1}})
        assert info.value.key_paths == ["search.horizon"]

    def test_tabulated_needs_table(self):
        with pytest.raises(ConfigError):
            parse_config({"nonlinearity": {"family": "tabulated"}, "H0": 1, "lam": 2})

    def test_relative_candidate_path(self, tmp_path):
        config = load_config(_write(tmp_path, "nonlinearity: {family: constant, params: [1]}\n"
                                              "H0: 1\nlam: 2\ncandidate_path: out/c.json\n"))
        assert config.candidate_path == tmp_path / "out" / "c.json"

    def test_unparseable_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "nonlinearity: [unclosed\n"))

    def test_shipped_fixtures_load(self):
        for path in sorted(FIXTURES.glob("*.yaml")):
            assert load_config(path).lam > 1.0


class TestArtifacts:
    """CSV and JSON writers."""

    def test_csv_deterministic(self, tmp_path):
        frame = pd.DataFrame({"t": [0.0, 0.1, 1.0 / 3.0], "v": [1e-17, -2.5, 3.0]})
        first = export_series(frame, tmp_path / "a.csv").read_bytes()
        second = export_series(frame, tmp_path / "b.csv").read_bytes()
        assert first == second
        assert pd.read_csv(tmp_path / "a.csv")["t"].iloc[2] == 1.0 / 3.0

    def test_empty_frame_writes_header(self, tmp_path):
        path = export_series(pd.DataFrame(columns=["t", "v"]), tmp_path / "empty.csv")
        assert path.read_text().strip() == "t,v"

    def test_json_records(self, tmp_path):
        path = export_series(pd.DataFrame({"k": [0, 1]}), tmp_path / "rows.json")
        payload = json.loads(path.read_text())
        assert payload == {"columns": ["k"], "rows": [{"k": 0}, {"k": 1}]}


class TestSettings:
    """Environment-driven settings."""

    def test_env_prefix(self, monkeypatch, tmp_path):
        monkeypatch.setenv("KIRCHHOFF_LOG_LEVEL", "debug")
        monkeypatch.setenv("KIRCHHOFF_OUTPUT_DIR", str(tmp_path))
        settings = Settings()
        assert settings.log_level == "DEBUG"
        assert settings.output_dir == tmp_path

    def test_bad_log_level(self, monkeypatch):
        monkeypatch.setenv("KIRCHHOFF_LOG_LEVEL", "chatty")
        with pytest.raises(ValidationError):
            Settings()

    def test_output_dir_precedence(self, tmp_path):
        config = load_config(CONSTANT_CONFIG)
        env_dir, cli_dir = tmp_path / "env", tmp_path / "cli"
        assert resolve_output_dir(cli_dir, Settings(output_dir=env_dir), config) == cli_dir
        assert resolve_output_dir(None, Settings(output_dir=env_dir), config) == env_dir
        assert resolve_output_dir(None, Settings(output_dir=None), config) == config.output_dir


class TestSummaries:
    """Verdicts folded into exit codes."""

    def _report(self, status):
        return VerificationReport(subject="x", clauses=[
            ClauseResult(clause="c", status=status)])

    @pytest.mark.parametrize("status,code", [(VerdictStatus.PASS, EXIT_OK),
                                             (VerdictStatus.WARN, EXIT_OK),
                                             (VerdictStatus.FAIL, EXIT_VERIFICATION_FAILED)])
    def test_exit_codes(self, status, code):
        summary = summarize("verify", [self._report(status)], Artifacts())
        assert summary.exit_code == code
        assert summary.status == status

    def test_candidate_resolution(self, tmp_path):
        config = load_config(CONSTANT_CONFIG)
        ctx = CommandContext(config=config, output_dir=tmp_path)
        assert ctx.resolve_candidate() == tmp_path / "candidate.json"
        explicit = CommandContext(config=config, output_dir=tmp_path,
                                  candidate_path=tmp_path / "other.json")
        assert explicit.resolve_candidate() == tmp_path / "other.json"


class TestMain:
    """End-to-end runs of the driver."""

    def test_parser_commands(self):
        args = build_parser().parse_args(["glue", "--config", "run.yaml", "--workers", "3"])
        assert (args.command, args.workers) == ("glue", 3)

    def test_verify_constant(self, tmp_path):
        code = main(["verify", "--config", str(CONSTANT_CONFIG), "--output-dir", str(tmp_path)])
        assert code == EXIT_OK
        payload = json.loads((tmp_path / "verify.json").read_text())
        assert payload["candidate"] is None
        assert {r["subject"] for r in payload["reports"]} == {"model", "dynamics", "pipeline"}
        assert all(r["status"] == "pass" for r in payload["reports"])

    def test_modes_constant(self, tmp_path):
        code = main(["modes", "--config", str(CONSTANT_CONFIG), "--output-dir", str(tmp_path)])
        assert code == EXIT_OK
        for name in ("mode_source.csv", "mode_target.csv", "floquet.json"):
            assert (tmp_path / name).is_file()
        assert not json.loads((tmp_path / "floquet.json").read_text())["unstable"]

    def test_glue_without_candidate(self, tmp_path):
        code = main(["glue", "--config", str(CONSTANT_CONFIG), "--output-dir", str(tmp_path)])
        assert code == EXIT_ERROR
        assert not (tmp_path / "verdicts.json").exists()

    def test_bridge_without_candidate(self, tmp_path):
        code = main(["bridge", "--config", str(CONSTANT_CONFIG), "--output-dir", str(tmp_path)])
        assert code == EXIT_ERROR

    def test_search_absent_removes_stale_candidate(self, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / "candidate.json").write_text("{}")
        code = main(["search", "--config", str(_write(tmp_path, SMALL_SEARCH)),
                     "--output-dir", str(out)])
        assert code == EXIT_OK
        result = json.loads((out / "search_result.json").read_text())
        assert result["candidate"] == "absent"
        assert result["found"] is False
        assert not (out / "candidate.json").exists()

    def test_invalid_config(self, tmp_path):
        config = _write(tmp_path, "nonlinearity: {family: constant, params: [1]}\nH0: 1\nlam: 0.5\n")
        assert main(["verify", "--config", str(config), "--output-dir", str(tmp_path)]) == EXIT_ERROR

    def test_missing_config_file(self, tmp_path):
        assert main(["verify", "--config", str(tmp_path / "nope.yaml")]) == EXIT_ERROR

    def test_failed_verification_exit_code(self, tmp_path):
        failing = VerificationReport(subject="fake", clauses=[
            ClauseResult.compare("always", 1.0, 0.0)])

        def fake(ctx):
            return summarize("verify", [failing], Artifacts())

        with patch.dict(COMMANDS, {"verify": fake}):
            code = main(["verify", "--config", str(CONSTANT_CONFIG),
                         "--output-dir", str(tmp_path)])
        assert code == EXIT_VERIFICATION_FAILED

    def test_metrics_written(self, tmp_path):
        main(["glue", "--config", str(CONSTANT_CONFIG), "--output-dir", str(tmp_path)])
        assert (tmp_path / "metrics.prom").is_file()
