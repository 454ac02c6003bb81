import json
import math

import numpy as np
import pytest

from mimoloc.cli import main
from mimoloc.config import ExperimentConfig, config_header_lines, load_config
from mimoloc.errors import ConfigError
from mimoloc import runners

TINY = [
    "num_antennas=4", "num_subcarriers=5", "num_symbols=2",
    "grid_x_min=-3", "grid_x_max=-1", "grid_y_min=0.5", "grid_y_max=2.5",
    "grid_step=0.25", "seeds=0,1", "sweep_sigmas=0.0,0.5",
    "sweep_antenna_counts=4,8", "oversampling=4",
]


def tiny_overrides(out_dir, extra=()):
    return TINY + list(extra) + [f"out_dir={out_dir}"]


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.carrier_frequency == 3.5e9
        assert cfg.snr_db == 9.0
        assert (cfg.ue_x, cfg.ue_y) == (-2.0, 1.0)
        assert cfg.grid().step == 0.02
        assert cfg.seeds == list(range(20))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            load_config(None, ["carier_frequency=1e9"])

    def test_override_coercion(self):
        cfg = load_config(None, ["num_antennas=8", "snr_db=null",
                                 "sweep_sigmas=0.1,0.2", "seeds=3,4"])
        assert cfg.num_antennas == 8
        assert cfg.snr_db is None
        assert cfg.sweep_sigmas == [0.1, 0.2]
        assert cfg.seeds == [3, 4]

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError):
            load_config(None, ["num_antennas=4.5"])
        with pytest.raises(ConfigError):
            load_config(None, ["snr_db=loud"])
        with pytest.raises(ConfigError):
            load_config(None, ["badly formed"])

    def test_json_file(self, tmp_path):
        doc = {"num_antennas": 8, "seeds": [1, 2, 3], "snr_db": None}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = load_config(str(path))
        assert cfg.num_antennas == 8
        assert cfg.seeds == [1, 2, 3]
        assert cfg.snr_db is None

    def test_json_file_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"frobnicate": 1}))
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_override_beats_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"num_antennas": 8}))
        cfg = load_config(str(path), ["num_antennas=16"])
        assert cfg.num_antennas == 16

    def test_header_lines_cover_every_key(self):
        cfg = ExperimentConfig()
        lines = config_header_lines(cfg)
        assert len(lines) == len(cfg.as_dict())
        assert all(line.startswith("# ") and "=" in line for line in lines)


class TestRunners:
    def test_simulate_then_calibrate_localize(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path, ["snr_db=30",
                                                          "num_symbols=50",
                                                          "spatial_half_width=2.0"]))
        paths = runners.run_simulate(cfg)
        outputs = runners.run_calibrate_localize(cfg, paths["csi"], paths["truth"])
        with open(outputs["report"]) as fh:
            report = json.load(fh)
        assert set(report["stages"]) == {"uncalibrated", "frequency", "calibrated"}
        cal = report["stages"]["calibrated"]
        assert cal["error_m"] < 0.25  # within one coarse grid cell
        assert (tmp_path / "tables_frequency.csv").exists()
        assert (tmp_path / "image_uncalibrated.csv").exists()

    def test_simulate_sidecar_round_trip(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path, ["freq_std=0.5", "seed=6"]))
        paths = runners.run_simulate(cfg)
        with open(paths["truth"]) as fh:
            truth = json.load(fh)
        from mimoloc.model import OffsetSpec, sample_offsets
        off = sample_offsets(OffsetSpec(freq_std=0.5, seed=6), 4, 5)
        assert np.allclose(truth["phi_f"], off.phi_f)
        assert np.allclose(truth["phi_a"], off.phi_a)
        assert truth["ue_x"] == -2.0

    def test_noiseless_sentinel_moduli(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path, ["snr_db=none"]))
        paths = runners.run_simulate(cfg)
        from mimoloc.csifile import read_csi
        csi, _ = read_csi(paths["csi"])
        assert np.allclose(np.abs(csi.data), 1.0, atol=1e-6)

    def test_crlb_sweep_output(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path))
        path = runners.run_crlb_sweep(cfg)
        lines = [l for l in open(path) if not l.startswith("#")]
        header, rows = lines[0], lines[1:]
        assert header.strip() == "kind,num_antennas,sigma_rad,rmse_m"
        assert len(rows) == 2 * 2 * 2  # kinds x counts x sigmas
        # sigma = 0 rows agree across kinds at fixed antenna count
        table = [r.strip().split(",") for r in rows]
        zero = {(r[0], r[1]): r[3] for r in table if float(r[2]) == 0.0}
        assert zero[("frequency", "4")] == zero[("spatial", "4")]

    def test_config_echo_header(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path))
        path = runners.run_crlb_sweep(cfg)
        text = open(path).read()
        assert "# num_antennas=4" in text
        assert "# csv_schema_version=1" in text

    def test_pmsr_sweep_output(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path, ["sweep_sigmas=0.3"]))
        path = runners.run_pmsr_sweep(cfg)
        lines = [l for l in open(path) if not l.startswith("#")]
        assert lines[0].strip() == "kind,sigma_rad,seed,pmsr_db,median_db"
        assert len(lines) == 1 + 2 * 2  # kinds x seeds

    def test_saf_outputs(self, tmp_path):
        cfg = load_config(None, tiny_overrides(tmp_path, ["saf_sigmas=0.4"]))
        outputs = runners.run_saf(cfg)
        assert "map_ideal" in outputs and "cuts_ideal" in outputs
        assert any(k.startswith("map_frequency") for k in outputs)
        pmsr_lines = [l for l in open(outputs["pmsr"]) if not l.startswith("#")]
        assert len(pmsr_lines) == 1 + 3  # ideal + frequency + spatial

    def test_determinism_byte_identical(self, tmp_path):
        names = ("crlb_sweep.csv", "pmsr_sweep.csv", "capture.csib", "truth.json")
        cfg = load_config(None, tiny_overrides(tmp_path))

        def run_all():
            runners.run_crlb_sweep(cfg)
            runners.run_pmsr_sweep(cfg)
            runners.run_simulate(cfg)
            return {name: (tmp_path / name).read_bytes() for name in names}

        assert run_all() == run_all()


class TestCli:
    def test_simulate_and_inspect(self, tmp_path, capsys):
        args = ["simulate"]
        for kv in tiny_overrides(tmp_path):
            args += ["--set", kv]
        assert main(args) == 0
        capsys.readouterr()
        assert main(["inspect", str(tmp_path / "capture.csib")]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["num_antennas"] == 4
        assert info["payload_bytes"] == 4 * 5 * 2 * 8

    def test_calibrate_localize_subcommand(self, tmp_path):
        base = ["--set", "snr_db=30", "--set", "spatial_half_width=1.0"]
        for kv in tiny_overrides(tmp_path):
            base += ["--set", kv]
        assert main(["simulate"] + base) == 0
        assert main(["calibrate-localize", "--csi", str(tmp_path / "capture.csib"),
                     "--truth", str(tmp_path / "truth.json")] + base) == 0
        assert (tmp_path / "localization.json").exists()

    def test_usage_errors_exit_1(self, tmp_path):
        assert main(["crlb-sweep", "--set", "nonsense=1",
                     "--out-dir", str(tmp_path)]) == 1
        assert main(["no-such-command"]) == 1
        assert main(["crlb-sweep", "--set", "num_antennas=1.5",
                     "--out-dir", str(tmp_path)]) == 1

    def test_data_errors_exit_2(self, tmp_path):
        missing = str(tmp_path / "nope.csib")
        assert main(["inspect", missing]) == 2
        bad = tmp_path / "bad.csib"
        bad.write_bytes(b"JUNKJUNKJUNK" + b"\x00" * 64)
        assert main(["inspect", str(bad)]) == 2

    def test_seed_and_out_dir_flags(self, tmp_path):
        args = ["simulate", "--seed", "9", "--out-dir", str(tmp_path)]
        for kv in TINY:
            args += ["--set", kv]
        assert main(args) == 0
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert truth["seed"] == 9
