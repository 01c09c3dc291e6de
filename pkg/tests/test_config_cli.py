import json
import os

import numpy as np
import pytest

import intermap.cli as cli
from intermap.config import ConfigError, config_hash, load_config
from intermap.reports import (
    RunManifest,
    StageTimer,
    file_sha256,
    read_curve_csv,
    read_manifest,
    read_report,
    read_series_csv,
    write_curve_csv,
    write_report,
    write_series_csv,
)
from intermap.ulam import NonConvergence


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestLoadConfig:
    def test_requires_seed(self, tmp_path):
        path = _write(tmp_path, "c.json", {"preset": "decay"})
        with pytest.raises(ConfigError, match="seed"):
            load_config(path, use_env=False)

    def test_unknown_key_named(self, tmp_path):
        path = _write(tmp_path, "c.json", {"seed": 1, "preset": "decay", "foo": 2})
        with pytest.raises(ConfigError, match="foo"):
            load_config(path, use_env=False)

    def test_unknown_block_key_named(self, tmp_path):
        path = _write(
            tmp_path,
            "c.json",
            {"seed": 1, "preset": "decay", "tails": {"n_mxa": 32}},
        )
        with pytest.raises(ConfigError, match="n_mxa"):
            load_config(path, use_env=False)

    def test_preset_and_params_conflict(self, tmp_path):
        path = _write(
            tmp_path,
            "c.json",
            {"seed": 1, "preset": "decay", "params": {"gamma": 0.5, "c0": 0.35}},
        )
        with pytest.raises(ConfigError, match="not both"):
            load_config(path, use_env=False)

    def test_explicit_params(self, tmp_path):
        path = _write(
            tmp_path,
            "c.json",
            {"seed": 3, "params": {"gamma": 0.5, "c0": 0.33, "pert_amp": 0.02}},
        )
        cfg = load_config(path, use_env=False)
        assert cfg.params.gamma == 0.5
        assert cfg.params.c0 == 0.33
        assert cfg.params.pert_amp == 0.02

    def test_override_precedence(self, tmp_path, monkeypatch):
        path = _write(tmp_path, "c.json", {"seed": 1, "preset": "decay"})
        monkeypatch.setenv("INTERMAP_SEED", "2")
        cfg = load_config(path)
        assert cfg.seed == 2  # env beats file
        cfg = load_config(path, overrides={"seed": 5})
        assert cfg.seed == 5  # flag beats env

    def test_env_preset_and_threads(self, monkeypatch):
        monkeypatch.setenv("INTERMAP_PRESET", "stable")
        monkeypatch.setenv("INTERMAP_SEED", "9")
        monkeypatch.setenv("INTERMAP_THREADS", "2")
        cfg = load_config(None)
        assert cfg.params.gamma == 0.75
        assert cfg.threads == 2

    def test_declared_tolerance_keys_accepted(self, tmp_path):
        path = _write(
            tmp_path,
            "c.json",
            {
                "seed": 1,
                "preset": "decay",
                "tails": {"slope_tolerance": 0.3},
                "limits": {"moment_tolerance": 0.5},
            },
        )
        cfg = load_config(path, use_env=False)
        assert cfg.block("tails")["slope_tolerance"] == 0.3

    def test_config_hash_ignores_key_order(self):
        a = {"seed": 1, "preset": "decay", "tails": {"n_max": 4, "quadrature_points": 32}}
        b = {"tails": {"quadrature_points": 32, "n_max": 4}, "preset": "decay", "seed": 1}
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash({**a, "seed": 2})


class TestReports:
    def test_report_round_trip_with_complex(self, tmp_path, decay):
        path = str(tmp_path / "r.json")
        write_report(
            path,
            experiment="demo",
            params=decay,
            seed=4,
            n_grid=[1, 2],
            estimates=[0.5, 0.25],
            verdicts={"ok": True},
            extras={"lam": 0.5 + 0.25j},
        )
        data = read_report(path)
        assert data["estimates"] == [0.5, 0.25]
        assert data["extras"]["lam"] == {"re": 0.5, "im": 0.25}
        assert data["verdicts"]["ok"] is True
        assert data["params"]["gamma"] == 0.5

    def test_series_csv_carries_17_digits(self, tmp_path):
        path = str(tmp_path / "s.csv")
        write_series_csv(path, [1, 2], [np.pi, 0.1875], [0.5, np.nan])
        text = open(path).read()
        assert "3.1415926535897931" in text
        assert "0.1875" in text
        n, vals, err = read_series_csv(path)
        assert n.tolist() == [1, 2]
        assert vals[0] == np.pi  # round trip is exact at 17 digits
        assert np.isnan(err[1]) and err[0] == 0.5

    def test_series_csv_without_stderr(self, tmp_path):
        path = str(tmp_path / "s.csv")
        write_series_csv(path, [1], [2.0])
        n, vals, err = read_series_csv(path)
        assert np.isnan(err[0])

    def test_curve_csv_round_trip(self, tmp_path):
        path = str(tmp_path / "c.csv")
        write_curve_csv(path, [0.0, 0.5], [0.75, 0.6])
        th, xs = read_curve_csv(path)
        assert th.tolist() == [0.0, 0.5]
        assert xs.tolist() == [0.75, 0.6]

    def test_manifest_records_stages_and_artifacts(self, tmp_path):
        man = RunManifest(command="demo", config={"seed": 1}, seed=1, threads=1)
        with StageTimer(man, "build"):
            pass
        art = tmp_path / "a.csv"
        art.write_text("n,value\n1,2\n")
        man.add_artifact(str(art))
        man.warn("something minor")
        d = man.to_dict()
        assert "build" in d["stages"]
        assert d["artifacts"][str(art)] == file_sha256(str(art))
        assert d["warnings"] == ["something minor"]
        assert d["kernel_backend"] in ("compiled", "python")
        assert d["config_hash"] == config_hash({"seed": 1})


@pytest.fixture()
def tails_config(tmp_path):
    return _write(
        tmp_path,
        "tails.json",
        {
            "seed": 1,
            "preset": "decay",
            "out_dir": str(tmp_path / "out"),
            "tails": {"n_max": 32, "quadrature_points": 128, "slope_tolerance": 1.0},
        },
    )


class TestCliExitCodes:
    def test_validate_accepts_preset(self, capsys):
        assert cli.main(["validate", "--preset", "decay"]) == 0
        out = capsys.readouterr().out
        assert "admissible c0 interval: (0.28868, 0.38490]" in out
        assert "c0 = 0.35 admissible" in out

    def test_validate_rejects_bad_c0(self, capsys):
        assert cli.main(["validate", "--gamma", "0.5", "--c0", "0.5"]) == 3
        assert "REJECTED" in capsys.readouterr().err

    def test_validate_requires_both_flags(self, capsys):
        assert cli.main(["validate", "--gamma", "0.5"]) == 3

    def test_unknown_config_key_exits_3(self, tmp_path, capsys):
        path = _write(tmp_path, "bad.json", {"seed": 1, "preset": "decay", "zz": 1})
        assert cli.main(["tails", "--config", path]) == 3
        assert "zz" in capsys.readouterr().err

    def test_missing_config_file_exits_3(self, tmp_path):
        assert cli.main(["tails", "--config", str(tmp_path / "none.json")]) == 3

    def test_tails_passes_and_writes_artifacts(self, tails_config, tmp_path):
        assert cli.main(["tails", "--config", tails_config]) == 0
        out = tmp_path / "out"
        man = read_manifest(str(out / "manifest.json"))
        assert man["ok"] is True
        assert man["failure"] is None
        n, vals, _ = read_series_csv(str(out / "tails.csv"))
        assert n[0] == 0 and vals[0] == 0.25  # Leb(Y) = 1/4
        assert n[1] == 1 and vals[1] == 0.1875  # Leb(phi > 1) = 3/16
        report = read_report(str(out / "tails_report.json"))
        assert report["verdicts"]["strictly_decreasing"] is True

    def test_verdict_failure_exits_2(self, tmp_path, capsys):
        path = _write(
            tmp_path,
            "t.json",
            {
                "seed": 1,
                "preset": "decay",
                "out_dir": str(tmp_path / "out2"),
                "tails": {
                    "n_max": 32,
                    "quadrature_points": 128,
                    "slope_tolerance": 1e-6,
                },
            },
        )
        assert cli.main(["tails", "--config", path]) == 2
        man = read_manifest(str(tmp_path / "out2" / "manifest.json"))
        assert man["ok"] is False
        assert "slope_matches_alpha" in man["failure"]

    def test_numeric_failure_exits_4_and_keeps_manifest(
        self, tails_config, tmp_path, monkeypatch
    ):
        def blow_up(cfg, manifest):
            raise NonConvergence("synthetic stall", 0.2)

        monkeypatch.setitem(cli._BODIES, "tails", blow_up)
        assert cli.main(["tails", "--config", tails_config]) == 4
        man = read_manifest(str(tmp_path / "out" / "manifest.json"))
        assert man["ok"] is False
        assert "NonConvergence" in man["failure"]

    def test_flag_overrides_config_seed(self, tails_config, tmp_path):
        assert cli.main(["tails", "--config", tails_config, "--seed", "77"]) == 0
        man = read_manifest(str(tmp_path / "out" / "manifest.json"))
        assert man["seed"] == 77

    def test_repeat_runs_reproduce_artifact_hashes(self, tmp_path):
        cfgs = []
        for sub in ("a", "b"):
            cfgs.append(
                _write(
                    tmp_path,
                    f"{sub}.json",
                    {
                        "seed": 6,
                        "preset": "decay",
                        "threads": 1,
                        "out_dir": str(tmp_path / sub),
                        "tails": {"n_max": 24, "quadrature_points": 128, "slope_tolerance": 1.0},
                    },
                )
            )
        assert cli.main(["tails", "--config", cfgs[0]]) == 0
        assert cli.main(["tails", "--config", cfgs[1]]) == 0
        ma = read_manifest(str(tmp_path / "a" / "manifest.json"))
        mb = read_manifest(str(tmp_path / "b" / "manifest.json"))
        ha = {os.path.basename(k): v for k, v in ma["artifacts"].items()}
        hb = {os.path.basename(k): v for k, v in mb["artifacts"].items()}
        assert ha == hb and ha

    def test_env_seed_reaches_manifest(self, tmp_path, monkeypatch):
        monkeypatch.setenv("INTERMAP_SEED", "123")
        monkeypatch.setenv("INTERMAP_OUT_DIR", str(tmp_path / "envout"))
        assert (
            cli.main(
                ["curves", "--preset", "decay"]
            )
            == 0
        )
        man = read_manifest(str(tmp_path / "envout" / "manifest.json"))
        assert man["seed"] == 123
