"""Command-line surface: ingestion contracts, exit codes, output files."""

import csv
import json

import numpy as np
import pytest

from conftest import write_home_price_csv
from shadowmnar import DataError, ScenarioConfig, generate
from shadowmnar.cli import RunConfig, ingest_csv, main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def tt_csv(tmp_path):
    data = generate(ScenarioConfig("TT", n=800, seed=4321))
    path = tmp_path / "tt.csv"
    data.to_csv(path)
    return path, data


class TestIngest:
    def test_round_trip_field_equality(self, tt_csv):
        path, data = tt_csv
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], out=".")
        back = ingest_csv(path, cfg)
        assert np.array_equal(back.covariates["x"], data.covariates["x"])
        assert np.array_equal(back.z, data.z)
        assert np.array_equal(back.r, data.r)
        assert np.array_equal(back.y, data.y, equal_nan=True)

    def test_indicator_column_round_trip(self, tt_csv):
        path, data = tt_csv
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], missing_indicator="r", out=".")
        back = ingest_csv(path, cfg)
        assert np.array_equal(back.r, data.r)

    def test_home_price_schema_missing_rate(self, tmp_path):
        path = tmp_path / "survey.csv"
        meta = write_home_price_csv(path)
        cfg = RunConfig(data=str(path), outcome="lhmpr", shadow="loripr",
                        covariates=["urban", "lsiz", "lfminc"], out=".")
        ds = ingest_csv(path, cfg)
        assert ds.missing_fraction == pytest.approx(meta["missing_fraction"], abs=1e-12)
        assert 0.16 < ds.missing_fraction < 0.22

    def test_zero_missing_is_valid(self, tmp_path):
        data = generate(ScenarioConfig("TT", n=300, seed=5, alpha=(50.0, 0.0)))
        path = tmp_path / "full.csv"
        data.to_csv(path)
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], out=".")
        ds = ingest_csv(path, cfg)
        assert ds.missing_fraction == 0.0

    def test_missing_shadow_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,z,y,r\n0.1,0.5,1.2,1\n0.2,,0.7,1\n")
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], out=".")
        with pytest.raises(DataError, match="line 3"):
            ingest_csv(path, cfg)

    def test_unparseable_numeric_reports_position(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,z,y\n0.1,0.5,1.2\nfoo,0.3,0.7\n")
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], out=".")
        with pytest.raises(DataError, match="line 3.*'x'"):
            ingest_csv(path, cfg)

    def test_missing_column_reported(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0.1,1.0\n")
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], out=".")
        with pytest.raises(DataError, match="missing required columns"):
            ingest_csv(path, cfg)

    def test_na_token(self, tmp_path):
        path = tmp_path / "na.csv"
        path.write_text("x,z,y\n0.1,0.5,NA\n0.2,0.3,0.7\n")
        cfg = RunConfig(data=str(path), outcome="y", shadow="z",
                        covariates=["x"], na_token="NA", out=".")
        ds = ingest_csv(path, cfg)
        assert ds.r.tolist() == [0, 1]


class TestEstimateCommand:
    def test_survey_run_writes_table(self, tmp_path):
        src = tmp_path / "survey.csv"
        write_home_price_csv(src)
        out = tmp_path / "results"
        code = run_cli("estimate", "--data", str(src), "--outcome", "lhmpr",
                       "--shadow", "loripr", "--covariates", "urban,lsiz,lfminc",
                       "--out", str(out))
        assert code == 0
        with (out / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [r["method"] for r in rows] == ["DR", "REG", "IPW", "CMP", "marIPW"]
        for r in rows:
            assert float(r["mu_ci_low"]) < float(r["mu_hat"]) < float(r["mu_ci_high"])
        for r in rows[:3]:
            assert r["gamma_hat"] != ""
        for r in rows[3:]:
            assert r["gamma_hat"] == ""
        # nonresponse here is outcome-driven; the slope interval excludes 0
        dr = rows[0]
        assert float(dr["gamma_ci_high"]) < 0.0

    def test_study_truth_dataset_detects_nonresponse_slope(self, tmp_path):
        data = generate(ScenarioConfig("TT", n=3126, seed=777)).without_oracle()
        src = tmp_path / "tt.csv"
        data.to_csv(src)
        out = tmp_path / "results"
        code = run_cli("estimate", "--data", str(src), "--outcome", "y",
                       "--shadow", "z", "--covariates", "x",
                       "--shadow-design", "x^2", "--methods", "dr",
                       "--out", str(out))
        assert code == 0
        with (out / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["gamma_ci_high"]) < 0.0

    def test_config_echo_sufficient_to_rerun(self, tmp_path):
        src = tmp_path / "survey.csv"
        write_home_price_csv(src, n=600)
        out1 = tmp_path / "run1"
        code = run_cli("estimate", "--data", str(src), "--outcome", "lhmpr",
                       "--shadow", "loripr", "--covariates", "urban,lsiz,lfminc",
                       "--methods", "dr,cmp", "--out", str(out1))
        assert code == 0
        echoed = json.loads((out1 / "config.json").read_text())
        rerun_cfg = {k: echoed[k] for k in
                     ("data", "outcome", "shadow", "covariates", "methods",
                      "level", "na_token")}
        cfg_file = tmp_path / "rerun.json"
        cfg_file.write_text(json.dumps(rerun_cfg))
        out2 = tmp_path / "run2"
        code = run_cli("estimate", "--config", str(cfg_file), "--out", str(out2))
        assert code == 0
        assert (out2 / "results.csv").read_text() == (out1 / "results.csv").read_text()

    def test_missing_required_option_exit_2(self, tmp_path):
        code = run_cli("estimate", "--data", "x.csv", "--out", str(tmp_path))
        assert code == 2

    def test_bad_file_exit_3(self, tmp_path):
        code = run_cli("estimate", "--data", str(tmp_path / "nope.csv"),
                       "--outcome", "y", "--shadow", "z", "--covariates", "x",
                       "--out", str(tmp_path))
        assert code == 3

    def test_estimation_failure_exit_4(self, tmp_path):
        # constant covariate makes every design collinear with the intercept
        path = tmp_path / "const.csv"
        rows = ["x,z,y"] + [f"1.0,{0.1 * i},{0.2 * i}" for i in range(40)]
        rows[5] = "1.0,0.4,"
        path.write_text("\n".join(rows) + "\n")
        code = run_cli("estimate", "--data", str(path), "--outcome", "y",
                       "--shadow", "z", "--covariates", "x",
                       "--out", str(tmp_path / "out"))
        assert code == 4

    def test_unknown_method_exit_2(self, tmp_path):
        src = tmp_path / "survey.csv"
        write_home_price_csv(src, n=400)
        code = run_cli("estimate", "--data", str(src), "--outcome", "lhmpr",
                       "--shadow", "loripr", "--covariates", "urban",
                       "--methods", "bogus", "--out", str(tmp_path / "o"))
        assert code == 2


class TestSimulateCommand:
    def test_single_replicate_smoke(self, tmp_path):
        out = tmp_path / "sim"
        code = run_cli("simulate", "--scenario", "TT", "--n", "300",
                       "--reps", "1", "--methods", "dr", "--seed", "5",
                       "--out", str(out))
        assert code == 0
        assert (out / "coverage_table.csv").exists()
        assert (out / "TT_300_dr.csv").exists()
        assert (out / "config.json").exists()
        assert (out / "mu_boxplot_TT.png").exists()

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "sim"
        code = run_cli("simulate", "--scenario", "TT", "--n", "300",
                       "--reps", "1", "--methods", "dr", "--seed", "5",
                       "--no-figures", "--out", str(out))
        assert code == 0
        assert not list(out.glob("*.png"))

    def test_sizes_grid(self, tmp_path):
        out = tmp_path / "sim"
        code = run_cli("simulate", "--scenario", "TT", "--sizes", "200,300",
                       "--reps", "2", "--methods", "cmp", "--seed", "6",
                       "--no-figures", "--out", str(out))
        assert code == 0
        with (out / "coverage_table.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3


class TestIdentifyBinaryCommand:
    def test_probabilities(self, tmp_path):
        # cells from eta = (0.3, 0.7), pz = 0.5, response (0.9, 0.6) by y
        path = tmp_path / "sol.json"
        code = run_cli("identify-binary",
                       "--r1", "0.315,0.09,0.135,0.21",
                       "--r0", "0.095,0.155", "--out", str(path))
        assert code == 0
        sol = json.loads(path.read_text())["solution"]
        assert sol["eta0"] == pytest.approx(0.3, abs=1e-8)
        assert sol["eta1"] == pytest.approx(0.7, abs=1e-8)
        assert sol["pz"] == pytest.approx(0.5, abs=1e-8)

    def test_counts_normalized(self, tmp_path):
        path = tmp_path / "sol.json"
        code = run_cli("identify-binary", "--counts",
                       "--r1", "315,90,135,210", "--r0", "95,155",
                       "--out", str(path))
        assert code == 0
        sol = json.loads(path.read_text())["solution"]
        assert sol["q0"] == pytest.approx(0.9, abs=1e-6)

    def test_uninformative_exit_3(self):
        # eta0 = eta1 = 0.5 with response (0.9, 0.6)
        code = run_cli("identify-binary",
                       "--r1", "0.225,0.15,0.225,0.15", "--r0", "0.125,0.125")
        assert code == 3

    def test_uniqueness_flag(self, tmp_path):
        path = tmp_path / "sol.json"
        code = run_cli("identify-binary",
                       "--r1", "0.315,0.09,0.135,0.21",
                       "--r0", "0.095,0.155",
                       "--check-uniqueness", "--grid-step", "0.1",
                       "--out", str(path))
        assert code == 0
        rep = json.loads(path.read_text())["uniqueness"]
        assert rep["n_clusters"] == 1
