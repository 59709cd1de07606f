"""Tests for TOML parsing, canonical serialization and the CLI contract."""

import json
import math
import os

import numpy as np
import pytest

from plflab.cli import main, run
from plflab.config import parse_config
from plflab.errors import ConfigurationError
from plflab.serialize import (
    canonical_json,
    csv_float,
    load_measure,
    sha256_of,
    write_measure,
)


def write_config(tmp_path, body):
    path = tmp_path / "exp.toml"
    path.write_text(body)
    return str(path)


MINIMAL = """
[fluid]
p = 1.7

[discretization]
n = 6
"""

SMALL_RUN = """
[fluid]
p = 1.7

[noise]
sigma0 = 0.5

[discretization]
n = 3
T = 2.0
dt = 0.01

[experiment]
seed = 99
burn_in = 0.5
thin = 5
replicas = 4
n_states = 10
separations = [1e-2, 1e-3]
"""


class TestParseConfig:
    def test_minimal_fills_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, MINIMAL))
        assert cfg.p == 1.7
        assert cfg.n == 6
        assert cfg.gamma == 2.5
        assert cfg.M == 24  # 4n default
        assert cfg.scheme == "tamed_euler"
        # hash is stable across reparses
        cfg2 = parse_config(write_config(tmp_path, MINIMAL))
        assert cfg.hash == cfg2.hash

    def test_gamma_rejected(self, tmp_path):
        path = write_config(tmp_path, MINIMAL + "\n[noise]\ngamma = 1.5\n")
        with pytest.raises(ConfigurationError, match="gamma must exceed 2"):
            parse_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, MINIMAL + "\n[noise]\nbogus = 1\n")
        with pytest.raises(ConfigurationError, match="unknown key"):
            parse_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = write_config(tmp_path, MINIMAL + "\n[extra]\nx = 1\n")
        with pytest.raises(ConfigurationError, match="unknown section"):
            parse_config(path)

    def test_duplicate_key_is_parse_error(self, tmp_path):
        path = write_config(tmp_path, "[fluid]\np = 1.7\np = 1.8\n")
        with pytest.raises(ConfigurationError):
            parse_config(path)

    def test_invalid_p_rejected_at_parse(self, tmp_path):
        path = write_config(tmp_path, "[fluid]\np = 2.5\n")
        with pytest.raises(Exception):
            parse_config(path)

    def test_hash_changes_with_content(self, tmp_path):
        a = parse_config(write_config(tmp_path, MINIMAL))
        b = parse_config(write_config(tmp_path, MINIMAL.replace("1.7", "1.8")))
        assert a.hash != b.hash


class TestCanonicalJson:
    def test_sorted_keys_and_stable_floats(self):
        s = canonical_json({"b": 0.1, "a": [1.0, 2, True, None, "x"]})
        assert s.index('"a"') < s.index('"b"')
        assert "0.1" in s
        assert canonical_json({"b": 0.1, "a": [1.0, 2, True, None, "x"]}) == s

    def test_nonfinite_floats(self):
        s = canonical_json({"x": math.inf, "y": -math.inf, "z": math.nan})
        assert '"inf"' in s and '"-inf"' in s and '"nan"' in s
        json.loads(s)  # stays standard JSON

    def test_numpy_scalars(self):
        s = canonical_json({"a": np.float64(1.5), "b": np.int64(3), "c": np.bool_(True)})
        assert json.loads(s) == {"a": 1.5, "b": 3, "c": True}

    def test_hash_deterministic(self):
        assert sha256_of({"a": 1}) == sha256_of({"a": 1})
        assert sha256_of({"a": 1}) != sha256_of({"a": 2})

    def test_csv_float_17_digits(self):
        assert csv_float(1.0 / 3.0) == "0.33333333333333331"
        assert float(csv_float(0.1)) == 0.1


class TestMeasureRoundtrip:
    def test_write_then_load(self, tmp_path):
        from plflab.kolmogorov import EmpiricalMeasure

        rng = np.random.default_rng(0)
        mu = EmpiricalMeasure(
            n=3, samples=rng.standard_normal((5, 24)), metadata={"burn_in": 1.0, "thin": 2, "total_time": 10.0, "dt": 0.01, "seed": 7, "config_hash": "x" * 64}
        )
        csv_path = str(tmp_path / "m.csv")
        meta_path = str(tmp_path / "m_meta.json")
        write_measure(csv_path, meta_path, mu, config_hash="y" * 64)
        back = load_measure(csv_path)
        assert back.n == 3
        assert np.array_equal(back.samples, mu.samples)
        assert back.metadata["burn_in"] == 1.0


class TestCliContract:
    def test_unknown_command(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, SMALL_RUN))
        with pytest.raises(ConfigurationError):
            run(cfg, "plot", out_dir=str(tmp_path / "out"))

    def test_simulate_writes_outputs(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out = str(tmp_path / "out")
        assert main(["simulate", "--config", path, "--out", out]) == 0
        traj = open(os.path.join(out, "trajectory.csv")).read()
        assert traj.splitlines()[0].startswith("# plflab")
        assert "config_hash=" in traj.splitlines()[1]
        assert traj.splitlines()[2] == "t,normH,normV,norm1p,Ip,intIp"
        echo = json.load(open(os.path.join(out, "config_echo.json")))
        assert echo["fluid"]["p"] == 1.7
        assert "config_hash" in echo

    def test_byte_identical_reruns(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        assert main(["simulate", "--config", path, "--out", out1]) == 0
        assert main(["simulate", "--config", path, "--out", out2]) == 0
        a = open(os.path.join(out1, "trajectory.csv"), "rb").read()
        b = open(os.path.join(out2, "trajectory.csv"), "rb").read()
        assert a == b

    def test_couple_byte_identical_across_workers(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out1, out2 = str(tmp_path / "w1"), str(tmp_path / "w2")
        assert main(["couple", "--config", path, "--out", out1, "--workers", "1"]) == 0
        assert main(["couple", "--config", path, "--out", out2, "--workers", "2"]) == 0
        for name in ("coupling.json", "coupled.csv"):
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, name

    def test_verify_exit_zero_and_report(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out = str(tmp_path / "out")
        assert main(["verify", "--config", path, "--out", out]) == 0
        rep = json.load(open(os.path.join(out, "verify.json")))
        assert rep["all_passed"] is True
        assert rep["checks"]["weak_form"]["fail"] == 0

    def test_constants_report(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out = str(tmp_path / "out")
        assert main(["constants", "--config", path, "--out", out]) == 0
        rep = json.load(open(os.path.join(out, "constants.json")))
        assert abs(rep["p_star"] - 1.60407) < 1e-4
        assert rep["condition_ok"] is True

    def test_config_error_exit_2(self, tmp_path):
        path = write_config(tmp_path, MINIMAL + "\n[noise]\ngamma = 1.0\n")
        assert main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        assert main(["simulate", "--config", path, "--out", out1, "--seed", "1234"]) == 0
        assert main(["simulate", "--config", path, "--out", out2]) == 0
        a = open(os.path.join(out1, "trajectory.csv"), "rb").read()
        b = open(os.path.join(out2, "trajectory.csv"), "rb").read()
        assert a != b

    def test_measure_roundtrip_via_cli(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out = str(tmp_path / "out")
        assert main(["measure", "--config", path, "--out", out]) == 0
        mu = load_measure(os.path.join(out, "measure.csv"))
        assert len(mu) >= 2
        meta = json.load(open(os.path.join(out, "measure_meta.json")))
        assert meta["n"] == 3

    def test_moments_reuse_measure_via_path(self, tmp_path):
        path = write_config(tmp_path, SMALL_RUN)
        out = str(tmp_path / "out")
        assert main(["measure", "--config", path, "--out", out]) == 0
        reuse = write_config(
            tmp_path,
            SMALL_RUN + f"\nmeasure_path = \"{os.path.join(out, 'measure.csv')}\"\n",
        )
        out2 = str(tmp_path / "out2")
        code = main(["moments", "--config", reuse, "--out", out2])
        assert code in (0, 1)  # statistical check on a tiny run may fail honestly
        rep = json.load(open(os.path.join(out2, "moments.json")))
        assert rep["n_samples"] >= 2

    def test_zero_noise_zero_initial_trajectory(self, tmp_path):
        body = SMALL_RUN.replace("sigma0 = 0.5", "sigma0 = 0.0")
        path = write_config(tmp_path, body)
        out = str(tmp_path / "out")
        assert main(["simulate", "--config", path, "--out", out]) == 0
        rows = [
            line for line in open(os.path.join(out, "trajectory.csv"))
            if not line.startswith("#") and not line.startswith("t,")
        ]
        for row in rows:
            assert all(float(v) == 0.0 for v in row.strip().split(",")[1:])
