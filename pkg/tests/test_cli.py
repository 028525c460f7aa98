import json
import math
import os

import numpy as np
import pytest

from hdpaired.cli import main
from hdpaired.matrixio import FeatureMatrix, load_matrix, save_matrix


def run(args):
    return main([str(a) for a in args])


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture()
def latent_pair(tmp_path):
    out = tmp_path / "synth"
    assert run(["synth", "latent", "--n", 30, "--p", 8, "--q", 8,
                "--strength", "0.8", "--seed", 5, "--out", out]) == 0
    return str(out / "x.bin"), str(out / "y.bin")


class TestSynth:
    def test_null_outputs(self, tmp_path):
        out = tmp_path / "s"
        assert run(["synth", "null", "--n", 10, "--p", 4, "--q", 5,
                    "--seed", 1, "--out", out]) == 0
        x = load_matrix(str(out / "x.bin"), "bin")
        y = load_matrix(str(out / "y.bin"), "bin")
        assert x.data.shape == (10, 4) and y.data.shape == (10, 5)
        truth = read_json(out / "truth.json")
        assert truth["results"]["kind"] == "null"
        assert truth["version"]

    def test_planted_truth_recorded(self, tmp_path):
        out = tmp_path / "s"
        assert run(["synth", "planted", "--n", 12, "--p", 20, "--q", 20,
                    "--su", 3, "--sv", 4, "--rho", "0.7", "--seed", 2,
                    "--out", out]) == 0
        truth = read_json(out / "truth.json")["results"]
        assert len(truth["support_u"]) == 3
        assert len(truth["support_v"]) == 4

    def test_deterministic_files(self, tmp_path):
        out = tmp_path / "a"
        blobs = []
        for _ in range(2):
            assert run(["synth", "latent", "--n", 8, "--p", 5, "--q", 5,
                        "--strength", "0.5", "--seed", 9, "--out", out]) == 0
            blobs.append(((out / "x.bin").read_bytes(), (out / "truth.json").read_bytes()))
        assert blobs[0] == blobs[1]


class TestDist:
    def test_three_subjects_three_distances(self, tmp_path):
        rng = np.random.default_rng(3)
        ids = ("a", "b", "c")
        synth = tmp_path / "s"
        synth.mkdir()
        save_matrix(FeatureMatrix(rng.standard_normal((3, 4)), ids), str(synth / "x.bin"))
        save_matrix(FeatureMatrix(rng.standard_normal((3, 5)), ids), str(synth / "y.bin"))
        out = tmp_path / "d"
        assert run(["dist", "--x", synth / "x.bin", "--y", synth / "y.bin",
                    "--bins", 4, "--out", out]) == 0
        lines = (out / "distances.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 3  # header + 3 pairs per modality
        report = read_json(out / "dist_report.json")
        assert report["results"]["x"]["n_pairs"] == 3
        assert report["results"]["x"]["bin_total"] == 3

    def test_histogram_bins_sum_to_pair_count(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "d"
        assert run(["dist", "--x", x, "--y", y, "--bins", 7, "--out", out]) == 0
        report = read_json(out / "dist_report.json")
        n = 30
        for tag in ("x", "y"):
            assert report["results"][tag]["bin_total"] == n * (n - 1) // 2


class TestInfer:
    def test_perm_report_schema(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "i"
        assert run(["infer", "perm", "--x", x, "--y", y, "--b", 99,
                    "--seed", 7, "--out", out]) == 0
        rep = read_json(out / "infer_perm.json")
        res = rep["results"]
        assert set(res) >= {"observed", "p_value", "p_value_smoothed",
                            "spearman_rho", "kendall_tau", "replicate_summary"}
        assert rep["config"]["seed"] == 7
        assert rep["input_digests"]

    def test_b_zero_is_validation_error(self, tmp_path, latent_pair, capsys):
        x, y = latent_pair
        rc = run(["infer", "perm", "--x", x, "--y", y, "--b", 0,
                  "--out", tmp_path / "i"])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] and "--b" in err["message"]

    def test_dcor(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "i"
        assert run(["infer", "dcor", "--x", x, "--y", y, "--out", out]) == 0
        res = read_json(out / "infer_dcor.json")["results"]
        assert res["degrees_of_freedom"] == 30 * 27 // 2 - 1

    def test_subsample(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "i"
        assert run(["infer", "subsample", "--x", x, "--y", y, "--b", 60,
                    "--ratio", "0.5", "--seed", 3, "--out", out]) == 0
        res = read_json(out / "infer_subsample.json")["results"]
        assert res["ci"]["lower"] <= res["ci"]["upper"]
        assert res["method"] == "root"

    def test_bootstrap_with_replicate_dump(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "i"
        assert run(["infer", "bootstrap", "--x", x, "--y", y, "--b", 40,
                    "--seed", 4, "--dump-replicates", "--out", out]) == 0
        lines = (out / "replicates_bootstrap.csv").read_text().strip().splitlines()
        assert len(lines) == 41

    def test_missing_file_errors(self, tmp_path, capsys):
        rc = run(["infer", "dcor", "--x", tmp_path / "nope.bin",
                  "--y", tmp_path / "nope.bin", "--out", tmp_path])
        assert rc == 1


class TestReport:
    def test_three_rows(self, tmp_path, latent_pair):
        x, y = latent_pair
        out = tmp_path / "r"
        assert run(["report", "--x", x, "--y", y, "--b", 99, "--ratio", "0.5",
                    "--seed", 1, "--out", out]) == 0
        rows = read_json(out / "inference_report.json")["results"]["rows"]
        assert [r["method"] for r in rows] == ["permutation", "dcor_ttest", "subsampling"]
        assert rows[0]["result_type"] == "p_value"
        assert rows[2]["result_type"] == "95% confidence interval"
        assert len(rows[2]["result"]) == 2


@pytest.fixture()
def planted_pair(tmp_path):
    out = tmp_path / "planted"
    assert run(["synth", "planted", "--n", 60, "--p", 30, "--q", 30,
                "--su", 4, "--sv", 4, "--rho", "0.9", "--seed", 6,
                "--out", out]) == 0
    return str(out / "x.bin"), str(out / "y.bin")


class TestScca:
    def test_fit_writes_model(self, tmp_path, planted_pair):
        x, y = planted_pair
        out = tmp_path / "f"
        assert run(["scca", "fit", "--x", x, "--y", y, "--c1", "1.8",
                    "--c2", "1.8", "--out", out]) == 0
        model = read_json(out / "model.json")
        assert model["u"]["dim"] == 30
        assert len(model["u"]["support"]) == len(model["u"]["values"])
        assert model["params"]["c1"] == 1.8
        fitrep = read_json(out / "scca_fit.json")["results"]
        assert fitrep["converged"] in (True, False)

    def test_cv_eval_subcluster_round_trip(self, tmp_path, planted_pair):
        x, y = planted_pair
        out = tmp_path / "cv"
        grid = tmp_path / "grid.csv"
        grid.write_text("c1,c2\n1.4,1.4\n2.0,2.0\n")
        assert run(["scca", "cv", "--x", x, "--y", y, "--grid-file", grid,
                    "--k", 3, "--seed", 2, "--out", out]) == 0
        rep = read_json(out / "cv_report.json")["results"]
        assert rep["selected"]["c1"] in (1.4, 2.0)
        assert len(rep["grid"]) == 2
        surface = (out / "cv_surface.csv").read_text().strip().splitlines()
        assert len(surface) == 3
        proj = (out / "projections.csv").read_text().strip().splitlines()
        assert len(proj) == 1 + 60
        assert rep["test_correlation"] is not None

        ev = tmp_path / "ev"
        assert run(["scca", "eval", "--x", x, "--y", y,
                    "--model", out / "model.json", "--out", ev]) == 0
        res = read_json(ev / "scca_eval.json")["results"]
        assert -1.0 <= res["test_correlation"] <= 1.0

        sc = tmp_path / "sc"
        assert run(["subcluster", "--x", x, "--y", y, "--model", out / "model.json",
                    "--k", 2, "--top", 2, "--out", sc]) == 0
        srep = read_json(sc / "subcluster_report.json")["results"]
        assert srep["k"] == 2
        assert len(srep["top"]) <= 2
        clusters = (sc / "clusters_x.csv").read_text().strip().splitlines()
        assert len(clusters) >= 3  # header + >= 2 selected features

    def test_cv_default_grid(self, tmp_path, planted_pair):
        x, y = planted_pair
        out = tmp_path / "cvd"
        assert run(["scca", "cv", "--x", x, "--y", y, "--cells", 2, "--k", 3,
                    "--seed", 2, "--out", out]) == 0
        rep = read_json(out / "cv_report.json")["results"]
        assert len(rep["grid"]) == 4


class TestFcg:
    def write_subject(self, d, name, t=120, m=3, seed=0, nuisance=True):
        rng = np.random.default_rng(seed)
        ts = rng.standard_normal((t, m))
        header = ",".join(f"roi{j}" for j in range(m))
        lines = [header] + [",".join(repr(float(v)) for v in row) for row in ts]
        (d / f"{name}.csv").write_text("\n".join(lines) + "\n")
        if nuisance:
            nu = rng.standard_normal((t, 2))
            lines = ["n0,n1"] + [",".join(repr(float(v)) for v in row) for row in nu]
            (d / f"{name}.nuisance.csv").write_text("\n".join(lines) + "\n")

    def test_two_subject_directory(self, tmp_path):
        src = tmp_path / "ts"
        src.mkdir()
        self.write_subject(src, "alpha", seed=1)
        self.write_subject(src, "beta", seed=2)
        out = tmp_path / "fcg"
        assert run(["fcg", "--input", src, "--fs", "1.0", "--out", out]) == 0
        fm = load_matrix(str(out / "fcg.bin"), "bin")
        assert fm.data.shape == (2, 3)  # m(m-1)/2 = 3
        assert fm.subject_ids == ("alpha", "beta")

    def test_missing_nuisance_names_subject(self, tmp_path, capsys):
        src = tmp_path / "ts"
        src.mkdir()
        self.write_subject(src, "alpha", seed=1)
        self.write_subject(src, "beta", seed=2, nuisance=False)
        rc = run(["fcg", "--input", src, "--fs", "1.0", "--out", tmp_path / "o"])
        assert rc == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert "beta" in err["message"]

    def test_rerun_bit_identical(self, tmp_path):
        src = tmp_path / "ts"
        src.mkdir()
        self.write_subject(src, "alpha", seed=3)
        self.write_subject(src, "beta", seed=4)
        outs = []
        for name in ("o1", "o2"):
            out = tmp_path / name
            assert run(["fcg", "--input", src, "--fs", "1.0", "--out", out]) == 0
            outs.append((out / "fcg.bin").read_bytes())
        assert outs[0] == outs[1]


class TestConfigPrecedence:
    def test_flag_beats_config_beats_default(self, tmp_path, latent_pair):
        x, y = latent_pair
        cfg = tmp_path / "conf.yaml"
        cfg.write_text(f"b: 55\nseed: 3\nx: {x}\ny: {y}\n")
        out = tmp_path / "i"
        assert run(["infer", "perm", "--config", cfg, "--b", 77, "--out", out]) == 0
        rep = read_json(out / "infer_perm.json")
        assert rep["config"]["b"] == 77      # flag wins
        assert rep["config"]["seed"] == 3    # config beats default
        assert rep["config"]["ratio"] == 0.135  # default survives

    def test_unknown_config_key_rejected(self, tmp_path, latent_pair, capsys):
        x, y = latent_pair
        cfg = tmp_path / "conf.yaml"
        cfg.write_text("bogus_key: 1\n")
        rc = run(["infer", "perm", "--config", cfg, "--x", x, "--y", y,
                  "--out", tmp_path / "i"])
        assert rc == 1


class TestDeterminism:
    def test_infer_rerun_byte_identical_across_threads(self, tmp_path, latent_pair):
        x, y = latent_pair
        blobs = []
        for i, threads in enumerate((1, 4)):
            out = tmp_path / f"d{i}"
            assert run(["infer", "perm", "--x", x, "--y", y, "--b", 50,
                        "--seed", 11, "--threads", threads, "--out", out]) == 0
            # threads is part of the resolved config, so compare results only
            rep = read_json(out / "infer_perm.json")
            blobs.append(json.dumps(rep["results"], sort_keys=True))
        assert blobs[0] == blobs[1]
