import numpy as np
import pytest

from landensemble.errors import ConfigError, DataError
from landensemble.separability import SeparabilityIndex, multiclass_separability
from landensemble.stats import BandSubset, estimate_class_statistics
from landensemble.svm import train_gaussian_ml_baseline
from landensemble.io import split_samples
from landensemble.synthgen import (
    ClassSpec,
    SceneSpec,
    ar1_covariance,
    generate_scene,
    load_scene_spec,
    paper_shaped_spec,
    parse_scene_spec,
    statistics_from_spec,
    stratified_subsample,
)


def _two_class(mean_a, mean_b, side=100, seed=0, d=2):
    eye = np.eye(d)
    return SceneSpec(
        d,
        (ClassSpec("a", np.full(d, mean_a, float), eye, 0.5), ClassSpec("b", np.full(d, mean_b, float), eye, 0.5)),
        side,
        side,
        seed,
    )


def _ml_accuracy(spec):
    scene = generate_scene(spec)
    train, test = split_samples(scene.samples, 0.5, seed=1)
    clf = train_gaussian_ml_baseline(train, scene.legend)
    return float(np.mean(clf.predict_features(test.features) == test.labels))


class TestGenerate:
    def test_deterministic(self):
        a = generate_scene(paper_shaped_spec(3))
        b = generate_scene(paper_shaped_spec(3))
        assert a.image.data.tobytes() == b.image.data.tobytes()
        assert np.array_equal(a.truth.labels, b.truth.labels)
        c = generate_scene(paper_shaped_spec(4))
        assert a.image.data.tobytes() != c.image.data.tobytes()

    def test_shapes_and_consistency(self):
        spec = paper_shaped_spec(0).with_size(20, 10)
        s = generate_scene(spec)
        assert s.image.data.shape == (6, 10, 20)
        assert s.truth.labels.shape == (10, 20)
        assert len(s.samples) == 200
        np.testing.assert_array_equal(s.samples.labels, s.truth.labels.ravel())
        np.testing.assert_array_equal(s.samples.features, s.image.pixels())
        np.testing.assert_array_equal(s.samples.pixels, np.arange(200))

    def test_identical_classes_are_chance(self):
        acc = _ml_accuracy(_two_class(0.0, 0.0, side=100))
        assert abs(acc - 0.5) <= 0.05

    def test_far_means_are_separable(self):
        acc = _ml_accuracy(_two_class(-5.0, 5.0, side=100))
        assert acc >= 0.999

    def test_moments_converge(self):
        spec = paper_shaped_spec(11).with_size(200, 200)
        scene = generate_scene(spec)
        est = estimate_class_statistics(scene.samples, scene.legend)
        true = statistics_from_spec(spec)
        for e, t in zip(est.classes, true.classes):
            sigma = np.sqrt(np.diag(t.covariance))
            assert np.all(np.abs(e.mean - t.mean) <= 4 * sigma / np.sqrt(e.count))
            np.testing.assert_allclose(e.covariance, t.covariance, atol=0.1 * sigma.max() ** 2)

    def test_non_pd_covariance(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        spec = SceneSpec(2, (ClassSpec("a", np.zeros(2), bad, 1.0),), 2, 2, 0)
        with pytest.raises(DataError, match="positive definite"):
            generate_scene(spec)

    def test_class_fractions(self):
        spec = paper_shaped_spec(2).with_size(100, 100)
        s = generate_scene(spec)
        by_name = {c.name: c.fraction for c in spec.classes}
        counts = np.bincount(s.samples.labels, minlength=5) / 10_000
        for cid, name in s.legend.entries():
            assert abs(counts[cid] - by_name[name]) < 0.02

    def test_statistics_oracle_separability(self):
        spec = _two_class(0.0, 1.0, side=100, seed=5, d=3)
        scene = generate_scene(spec)
        est = estimate_class_statistics(scene.samples, scene.legend)
        b = BandSubset((0, 1, 2))
        for idx in SeparabilityIndex:
            got = multiclass_separability(est, b, idx).value
            want = multiclass_separability(statistics_from_spec(spec), b, idx).value
            assert got == pytest.approx(want, rel=0.05)


class TestSubsample:
    def test_per_class_cap_and_order(self):
        s = generate_scene(paper_shaped_spec(0)).samples
        sub = stratified_subsample(s, 20, seed=1)
        assert np.all(np.bincount(sub.labels) == 20)
        assert np.all(np.diff(sub.pixels) > 0)
        np.testing.assert_array_equal(sub.features, s.features[sub.pixels])

    def test_small_class_kept_whole(self):
        s = generate_scene(paper_shaped_spec(0).with_size(5, 5)).samples
        sub = stratified_subsample(s, 1000, seed=1)
        assert len(sub) == len(s)


class TestSpecParsing:
    TEXT = """
[scene]
n_bands = 3
width = 4
height = 5
seed = 7

[class water]
fraction = 0.4
mean = 10 20 30
covariance = 4 1 0; 1 4 1; 0 1 4

[class urban]
fraction = 0.6
mean = 14 20 35
std = 2 2 3
correlation = 0.5
"""

    def test_both_forms(self):
        spec = parse_scene_spec(self.TEXT)
        assert (spec.n_bands, spec.width, spec.height, spec.seed) == (3, 4, 5, 7)
        water, urban = spec.classes
        np.testing.assert_array_equal(water.covariance, [[4, 1, 0], [1, 4, 1], [0, 1, 4]])
        np.testing.assert_allclose(urban.covariance, [[4, 2, 1.5], [2, 4, 3], [1.5, 3, 9]])
        assert spec.legend().names == ("urban", "water")

    def test_statistics_in_legend_order(self):
        st = statistics_from_spec(parse_scene_spec(self.TEXT))
        np.testing.assert_array_equal(st[0].mean, [14, 20, 35])

    def test_ar1(self):
        np.testing.assert_array_equal(ar1_covariance([1, 2], 0.0), np.diag([1.0, 4.0]))

    @pytest.mark.parametrize(
        "edit",
        [
            ("fraction = 0.6", "fraction = 0.7"),
            ("mean = 10 20 30", "mean = 10 20"),
            ("covariance = 4 1 0; 1 4 1; 0 1 4", "covariance = 4 1; 1 4"),
            ("[scene]", "[scenery]"),
            ("mean = 10 20 30", "mean = 10 x 30"),
            ("[class urban]", "[urban]"),
        ],
    )
    def test_errors(self, edit):
        with pytest.raises(ConfigError):
            parse_scene_spec(self.TEXT.replace(*edit))

    def test_file(self, tmp_path):
        (tmp_path / "s.ini").write_text(self.TEXT)
        assert load_scene_spec(tmp_path / "s.ini").n_bands == 3
        with pytest.raises(ConfigError):
            load_scene_spec(tmp_path / "missing.ini")

    def test_paper_shaped(self):
        spec = paper_shaped_spec()
        assert spec.n_bands == 6
        assert spec.legend().names == ("built-up", "light swamp", "thick swamp", "vegetation", "water")
