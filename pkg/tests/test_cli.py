import json
import os

import pytest

from deepgp_lab import cli, structure


def write_config(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def rates_config(tmp_path):
    g = structure.make_graph(0, (1, 1), [[(1,)]])
    eta = structure.CompositionStructure(graph=g, betas=(1.0,), bounds=(0.5, 1.0))
    return write_config(tmp_path, "rates.json", {
        "schema_version": 1,
        "structure": structure.structure_to_dict(eta),
        "family": "wavelet",
        "n_list": [100, 1000, 10000],
    })


def sample_config(tmp_path, **kw):
    payload = {"schema_version": 1, "family": "wavelet", "beta": 1.0, "r": 1,
               "n": 256, "count": 3}
    payload.update(kw)
    return write_config(tmp_path, "sample.json", payload)


class TestExitCodes:
    def test_rates_success(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert cli.main(["rates", "--config", rates_config(tmp_path),
                         "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "rates.csv"))
        assert os.path.exists(os.path.join(out, "manifest.json"))

    def test_missing_config_flag(self, capsys):
        assert cli.main(["rates"]) == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "validation"

    def test_missing_config_file(self, capsys):
        assert cli.main(["rates", "--config", "/nonexistent.json"]) == 1

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["rates", "--config", str(p)]) == 1

    def test_unknown_field_rejected(self, tmp_path, capsys):
        cfg = sample_config(tmp_path, bogus_field=1)
        assert cli.main(["sample", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert "bogus_field" in err["detail"]

    def test_wrong_schema_version(self, tmp_path, capsys):
        cfg = sample_config(tmp_path, schema_version=99)
        assert cli.main(["sample", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 1

    def test_numeric_failure_exit_2(self, tmp_path, capsys):
        # conditioning so tight that rejection sampling exhausts its budget
        cfg = write_config(tmp_path, "s.json", {
            "schema_version": 1, "family": "wavelet", "beta": 1.0, "r": 1,
            "n": 256, "count": 1, "conditioned": True, "k_prime": -0.999})
        assert cli.main(["sample", "--config", cfg,
                         "--out", str(tmp_path / "o")]) == 2


class TestSampleCommand:
    def test_outputs(self, tmp_path):
        out = str(tmp_path / "out")
        assert cli.main(["sample", "--config", sample_config(tmp_path),
                         "--seed", "3", "--out", out]) == 0
        stats = (tmp_path / "out" / "stats.csv").read_text().splitlines()
        assert stats[0] == "index,attempts,acceptance_rate,besov_norm,holder_norm,sup_norm"
        assert len(stats) == 4
        paths = json.loads((tmp_path / "out" / "paths.json").read_text())
        assert len(paths) == 3

    def test_seed_changes_output(self, tmp_path):
        cfg = sample_config(tmp_path)
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        cli.main(["sample", "--config", cfg, "--seed", "1", "--out", a])
        cli.main(["sample", "--config", cfg, "--seed", "2", "--out", b])
        assert (tmp_path / "a" / "stats.csv").read_text() != \
            (tmp_path / "b" / "stats.csv").read_text()


class TestDeterminism:
    def test_rates_rerun_byte_identical(self, tmp_path):
        cfg = rates_config(tmp_path)
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert cli.main(["rates", "--config", cfg, "--out", a]) == 0
        assert cli.main(["rates", "--config", cfg, "--out", b]) == 0
        assert (tmp_path / "a" / "rates.csv").read_bytes() == \
            (tmp_path / "b" / "rates.csv").read_bytes()

    def test_sample_rerun_byte_identical(self, tmp_path):
        cfg = sample_config(tmp_path)
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert cli.main(["sample", "--config", cfg, "--seed", "7", "--out", a]) == 0
        assert cli.main(["sample", "--config", cfg, "--seed", "7", "--out", b]) == 0
        for name in ("stats.csv", "paths.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()


class TestPriorAndFit:
    def space_cfg(self):
        return {"input_dim": 1, "max_q": 1, "max_width": 1,
                "beta_bounds": [0.5, 1.0]}

    def test_prior_command(self, tmp_path):
        cfg = write_config(tmp_path, "prior.json", {
            "schema_version": 1, "space": self.space_cfg(), "family": "wavelet",
            "n": 200, "beta_grid": [0.5, 1.0], "draws": 2})
        out = str(tmp_path / "out")
        assert cli.main(["prior", "--config", cfg, "--out", out]) == 0
        weights = (tmp_path / "out" / "weights.csv").read_text().splitlines()
        assert len(weights) == 7  # header + 6 structures
        draws = json.loads((tmp_path / "out" / "draws.json").read_text())
        assert len(draws) == 2

    def test_fit_command(self, tmp_path):
        cfg = write_config(tmp_path, "fit.json", {
            "schema_version": 1, "space": self.space_cfg(), "family": "wavelet",
            "n": 100, "beta_grid": [1.0],
            "truth": {"type": "zero"},
            "posterior": {"iterations": 60, "pcn_step": 0.8,
                          "structure_move_prob": 0.1, "burn_in": 0.5}})
        out = str(tmp_path / "out")
        assert cli.main(["fit", "--config", cfg, "--seed", "1", "--out", out]) == 0
        trace = (tmp_path / "out" / "trace.csv").read_text().splitlines()
        assert len(trace) == 61
        summary = (tmp_path / "out" / "summary.csv").read_text().splitlines()
        assert summary[0] == "n,pcn_acceptance,structure_acceptance,median_l2_error"


class TestVerifyCommand:
    def test_rates_suite_passes(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert cli.main(["verify", "--suite", "rates", "--out", out]) == 0
        stdout = capsys.readouterr().out
        assert "[PASS]" in stdout and "[FAIL]" not in stdout
        assert os.path.exists(os.path.join(out, "verify.csv"))
