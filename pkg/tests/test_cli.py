import json

import pytest

from landensemble.cli import main, read_config_file
from landensemble.errors import ConfigError

SMALL = ["--width", "24", "--height", "24", "--samples-per-class", "40"]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(d), "--seed", "1", "--width", "24", "--height", "24",
                 "--samples-per-class", "40"]) == 0
    return d


class TestStages:
    def test_stats(self, synth_dir, capsys):
        assert main(["stats", "--samples", str(synth_dir / "samples.csv")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"built-up", "light swamp", "thick swamp", "vegetation", "water"}
        assert out["water"]["count"] == 40

    def test_rank(self, synth_dir, tmp_path, capsys):
        rc = main(["rank", "--samples", str(synth_dir / "samples.csv"), "--index", "td", "--k", "2",
                   "--out", str(tmp_path / "r.csv")])
        assert rc == 0
        assert len((tmp_path / "r.csv").read_text().splitlines()) == 16
        assert len(capsys.readouterr().out.splitlines()) == 10

    def test_train_classify_fuse_evaluate(self, synth_dir, tmp_path, capsys):
        s = str(synth_dir / "samples.csv")
        for i, bands in enumerate(["4,5", "3,4,6", "1,4,5"]):
            assert main(["train", "--samples", s, "--bands", bands, "--out", str(tmp_path / f"m{i}.txt")]) == 0
            assert main(["classify", "--model", str(tmp_path / f"m{i}.txt"),
                         "--image", str(synth_dir / "scene.hdr"), "--out", str(tmp_path / f"map{i}")]) == 0
        maps = [str(tmp_path / f"map{i}") for i in range(3)]
        assert main(["fuse", "--maps", *maps, "--out", str(tmp_path / "fused")]) == 0
        capsys.readouterr()
        assert main(["evaluate", "--predicted", str(tmp_path / "fused"),
                     "--reference", str(synth_dir / "truth")]) == 0
        res = json.loads(capsys.readouterr().out)
        assert res["n"] == 24 * 24 and 0.5 < res["overall_accuracy"] <= 1.0
        assert main(["evaluate", "--model", str(tmp_path / "m0.txt"), "--samples", s]) == 0
        assert json.loads(capsys.readouterr().out)["n"] == 200
        assert main(["evaluate", "--diversity", *maps]) == 0
        assert len(json.loads(capsys.readouterr().out)["pairwise_kappas"]) == 3


class TestExitCodes:
    def test_config_error(self, tmp_path):
        assert main(["experiment", "--out", str(tmp_path), "--plan", "bogus:2"]) == 2

    def test_evaluate_needs_inputs(self):
        assert main(["evaluate"]) == 2

    def test_data_error(self, tmp_path):
        (tmp_path / "bad.csv").write_text("band_1,label\nabc,x\n")
        assert main(["stats", "--samples", str(tmp_path / "bad.csv")]) == 3

    def test_missing_image(self, tmp_path, synth_dir):
        (tmp_path / "m.txt").write_text("nope")
        assert main(["classify", "--model", str(tmp_path / "m.txt"), "--image",
                     str(synth_dir / "scene.hdr"), "--out", str(tmp_path / "x")]) == 3

    def test_convergence_error(self, synth_dir, tmp_path):
        args = ["train", "--samples", str(synth_dir / "samples.csv"), "--out", str(tmp_path / "m.txt"),
                "--max-iter", "2"]
        assert main(args) == 0
        assert main(args + ["--strict-convergence"]) == 4

    def test_experiment_convergence_error(self, tmp_path):
        rc = main(["experiment", "--out", str(tmp_path), "--plan", "b:2", *SMALL,
                   "--max-iter", "2", "--strict-convergence"])
        assert rc == 4


class TestExperimentCommand:
    def test_outputs_and_determinism(self, tmp_path):
        args = ["experiment", "--seed", "2", *SMALL]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert "report_ztests.csv" in {str(f) for f in files}
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# small run\nplan = bhattacharyya:2, divergence:3\nm = 3\nseed = 4\n"
            f"out = {tmp_path / 'fromfile'}\nwidth = 24\nheight = 24\nsamples_per_class = 40\n"
        )
        assert main(["experiment", "--config", str(cfg)]) == 0
        rows = (tmp_path / "fromfile" / "report_ensembles.csv").read_text().splitlines()
        assert len(rows) == 1 + 2 * 3
        assert main(["experiment", "--config", str(cfg), "--m", "2", "--out", str(tmp_path / "flag")]) == 0
        rows = (tmp_path / "flag" / "report_ensembles.csv").read_text().splitlines()
        assert len(rows) == 1 + 2 * 2

    def test_report_reemit(self, tmp_path):
        assert main(["experiment", "--out", str(tmp_path / "a"), "--plan", "b:2,none:5", *SMALL]) == 0
        assert main(["report", "--from", str(tmp_path / "a"), "--out", str(tmp_path / "b")]) == 0
        for name in ("report_ensembles.csv", "report_ztests.csv", "summary.txt", "report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_report_missing(self, tmp_path):
        assert main(["report", "--from", str(tmp_path), "--out", str(tmp_path / "o")]) == 3


class TestConfigFile:
    def test_unknown_key(self, tmp_path):
        (tmp_path / "c").write_text("colour = red\n")
        with pytest.raises(ConfigError, match="unknown key"):
            read_config_file(tmp_path / "c")

    def test_bad_value(self, tmp_path):
        (tmp_path / "c").write_text("m = five\n")
        with pytest.raises(ConfigError, match="bad value"):
            read_config_file(tmp_path / "c")

    def test_parse(self, tmp_path):
        (tmp_path / "c").write_text("C = 5  # box\ntrain-fraction = 0.6\nstrict_convergence = yes\n")
        assert read_config_file(tmp_path / "c") == {"C": 5.0, "train_fraction": 0.6, "strict_convergence": True}
