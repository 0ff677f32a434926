import json
import os

import numpy as np
import pytest

from svdmimo import FeatureBlock, MetricsRecord
from svdmimo.cli import PRESETS, _build_config, build_parser, main, parse_config_file
from svdmimo.results_io import (
    export_feature_block,
    import_feature_block,
    read_csv_rows,
    record_to_csv_text,
    record_to_json_text,
)


def run_cli(argv):
    return main(argv)


class TestConfigParsing:
    def test_su_preset(self):
        args = build_parser().parse_args(["snr-table", "--preset", "su-4x4"])
        cfg = _build_config(args)
        assert (cfg.n_tx, cfg.m_rx, cfg.users) == (4, 4, 1)

    def test_mu_preset(self):
        args = build_parser().parse_args(["end-to-end", "--preset", "mu-16x4x4"])
        cfg = _build_config(args)
        assert (cfg.mode, cfg.n_tx, cfg.m_rx, cfg.users) == ("mu", 16, 4, 4)

    def test_divisibility_rejected(self):
        assert run_cli(["snr-table", "--n", "5", "--m", "2", "--k", "2"]) == 2

    def test_no_subcommand_usage(self, capsys):
        assert run_cli([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_config_file_roundtrip(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("n_tx=8\nm_rx=8\ntrials=10\nsnr_db_list=-8,-2\n# comment\n")
        kwargs = parse_config_file(str(p))
        assert kwargs["n_tx"] == 8
        assert kwargs["snr_db_list"] == (-8.0, -2.0)

    def test_config_file_unknown_key(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("antennas=4\n")
        from svdmimo import ConfigError

        with pytest.raises(ConfigError, match="antennas"):
            parse_config_file(str(p))

    def test_flags_override_config_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("n_tx=8\nm_rx=8\ntrials=10\n")
        args = build_parser().parse_args(
            ["snr-table", "--config", str(p), "--n", "4", "--m", "4"]
        )
        cfg = _build_config(args)
        assert cfg.n_tx == 4 and cfg.trials == 10

    def test_snr_range(self):
        args = build_parser().parse_args(["snr-table", "--snr-range=-8:4:6"])
        cfg = _build_config(args)
        assert cfg.snr_db_list == (-8.0, -2.0, 4.0)

    def test_presets_cover_reference_setups(self):
        assert PRESETS["su-2x2"][1:] == (2, 2, 1)
        assert PRESETS["mu-4x2x2"] == ("mu", 4, 2, 2)


class TestSnrTableCommand:
    def test_writes_manifest_and_results(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            [
                "snr-table", "--preset", "su-4x4", "--snr", "-8",
                "--trials", "2000", "--seed", "7", "--out", str(out),
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 7
        assert manifest["config"]["n_tx"] == 4
        rows = read_csv_rows(out / "snr_table.csv")
        assert len(rows) == 1
        assert all(f"sub_{q}" in rows[0] for q in range(1, 5))

    def test_reproducible_bytes_across_runs_and_workers(self, tmp_path):
        outs = []
        for name, workers in [("a", "1"), ("b", "1"), ("c", "4")]:
            out = tmp_path / name
            run_cli(
                [
                    "snr-table", "--preset", "su-2x2", "--snr=-8,-2",
                    "--trials", "4000", "--seed", "11", "--workers", workers,
                    "--out", str(out),
                ]
            )
            outs.append(out)
        ref_csv = (outs[0] / "snr_table.csv").read_bytes()
        ref_json = (outs[0] / "snr_table.json").read_bytes()
        for out in outs[1:]:
            assert (out / "snr_table.csv").read_bytes() == ref_csv
            assert (out / "snr_table.json").read_bytes() == ref_json

    def test_json_mirror_equals_csv(self, tmp_path):
        out = tmp_path / "run"
        run_cli(
            [
                "snr-table", "--preset", "su-2x2", "--snr", "-8",
                "--trials", "1000", "--seed", "3", "--out", str(out),
            ]
        )
        csv_rows = read_csv_rows(out / "snr_table.csv")
        json_rows = json.loads((out / "snr_table.json").read_text())["rows"]
        assert len(csv_rows) == len(json_rows)
        for a, b in zip(csv_rows, json_rows):
            for key, value in b.items():
                assert a[key] == pytest.approx(value, abs=0.0)

    def test_manifest_written_before_results(self, tmp_path, monkeypatch):
        import svdmimo.cli as cli_mod

        def boom(*args, **kwargs):
            raise RuntimeError("simulated interruption")

        monkeypatch.setattr(cli_mod, "write_results", boom)
        out = tmp_path / "run"
        with pytest.raises(RuntimeError):
            run_cli(
                [
                    "snr-table", "--preset", "su-2x2", "--snr", "-8",
                    "--trials", "100", "--out", str(out),
                ]
            )
        assert (out / "manifest.json").exists()
        assert not (out / "snr_table.csv").exists()


class TestOtherCommands:
    def test_end_to_end_command(self, tmp_path):
        out = tmp_path / "e2e"
        code = run_cli(
            [
                "end-to-end", "--preset", "su-4x4", "--snr", "-8",
                "--trials", "20", "--policies", "importance,random",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = read_csv_rows(out / "end_to_end.csv")
        assert {r["policy"] for r in rows} == {"importance", "random"}

    def test_end_to_end_with_external_features(self, tmp_path):
        rng = np.random.default_rng(17)
        block = FeatureBlock(
            features=rng.standard_normal((8, 6)), importance=rng.exponential(size=8)
        )
        feat_path = tmp_path / "block.csv"
        export_feature_block(block, str(feat_path))
        out = tmp_path / "ext"
        code = run_cli(
            [
                "end-to-end", "--preset", "su-4x4", "--snr", "10",
                "--trials", "5", "--features", str(feat_path), "--out", str(out),
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["b_features"] == 8
        assert manifest["config"]["d_dim"] == 6

    def test_estimation_sweep_command(self, tmp_path):
        out = tmp_path / "sweep"
        code = run_cli(
            [
                "estimation-sweep", "--preset", "su-4x4", "--snr", "0",
                "--trials", "10", "--out", str(out),
            ]
        )
        assert code == 0
        rows = read_csv_rows(out / "estimation_sweep.csv")
        assert {r["estimator"] for r in rows} == {"perfect", "ls", "mmse", "refined"}

    def test_calibrate_with_builtin_reference_fails_with_report(self, tmp_path, capsys):
        out = tmp_path / "cal"
        code = run_cli(["calibrate", "--trials", "4000", "--out", str(out)])
        assert code == 3
        err = capsys.readouterr().err
        assert "error[calibration]" in err
        rows = read_csv_rows(out / "calibration.csv")
        assert len(rows) == 6
        meta = json.loads((out / "calibration.json").read_text())["meta"]
        assert meta["convention"] == "over_n"
        assert meta["averaging"] == "db_domain"
        assert meta["passed"] is False

    def test_calibrate_with_synthetic_reference_passes(self, tmp_path):
        from svdmimo import ExperimentConfig, run_equivalent_snr_table

        cfg = ExperimentConfig(
            trials=10000, seed=55, convention="unit", averaging="db_domain",
            snr_db_list=(-8.0,),
        )
        lines = ["n_tx,m_rx,subchannel,equivalent_snr_db,true_snr_db"]
        for combo in [(2, 2), (4, 4)]:
            row = run_equivalent_snr_table(
                cfg.replace(n_tx=combo[0], m_rx=combo[1]), combos=[combo]
            ).rows[0]
            for q in range(1, combo[0] + 1):
                lines.append(f"{combo[0]},{combo[1]},{q},{row[f'sub_{q}']!r},-8.0")
        ref = tmp_path / "reference.csv"
        ref.write_text("\n".join(lines) + "\n")
        out = tmp_path / "cal"
        code = run_cli(
            [
                "calibrate", "--reference", str(ref), "--trials", "10000",
                "--seed", "77", "--out", str(out),
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["convention"] == "unit"
        assert manifest["averaging"] == "db_domain"


class TestFeatureBlockIO:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        block = FeatureBlock(
            features=rng.standard_normal((6, 4)), importance=rng.standard_normal(6)
        )
        path = tmp_path / "features.csv"
        export_feature_block(block, str(path))
        back = import_feature_block(str(path))
        assert np.array_equal(back.features, block.features)
        assert np.array_equal(back.importance, block.importance)

    def test_column_count_is_dim_plus_two(self, tmp_path):
        rng = np.random.default_rng(9)
        block = FeatureBlock(
            features=rng.standard_normal((3, 8)), importance=np.ones(3)
        )
        path = tmp_path / "features.csv"
        export_feature_block(block, str(path))
        header = path.read_text().splitlines()[0].split(",")
        assert len(header) == 8 + 2

    def test_rejects_other_csv(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        from svdmimo import ConfigError

        with pytest.raises(ConfigError):
            import_feature_block(str(path))


class TestRecordSerialization:
    def test_csv_and_json_are_deterministic(self):
        record = MetricsRecord(
            kind="demo",
            rows=[{"x": 1, "y": 0.1 + 0.2}, {"x": 2, "y": 1.0 / 3.0}],
            meta={"seed": 1},
        )
        assert record_to_csv_text(record) == record_to_csv_text(record)
        assert record_to_json_text(record) == record_to_json_text(record)
        # repr round-trips: parsing the CSV recovers the exact floats
        text = record_to_csv_text(record).splitlines()
        assert float(text[1].split(",")[1]) == 0.1 + 0.2
