import zipfile

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microvid.groups import Group
from microvid.ingest import LabeledDataset
from microvid.learn import (
    GroupClassifier,
    SplitPlan,
    expand_instances,
    evaluate_accuracy,
    fuse_median,
    instance_rows,
    load_bundle,
    predict_video,
    round_half_up,
    run_experiment,
    save_bundle,
    select_hyperparameters,
    split_dataset,
    train_group_model,
)


def dataset(n_pos, n_neg, threshold=1.0):
    entries = [(f"p{i:04d}", True) for i in range(n_pos)] + [(f"n{i:04d}", False) for i in range(n_neg)]
    return LabeledDataset(threshold, tuple(entries))


class StubClassifier:
    """Fixed per-row labels and scores, for the voting rule."""

    def __init__(self, labels, scores):
        self._labels, self._scores = np.asarray(labels), np.asarray(scores, dtype=float)

    def predict(self, rows):
        return self._labels[: len(rows)]

    def score_instances(self, rows):
        return self._scores[: len(rows)]


class TestSplit:
    def test_471_positives(self):
        plan = split_dataset(dataset(471, 600), seed=0)
        assert (len(plan.train_pos), len(plan.test_pos)) == (314, 157)
        assert (len(plan.train_neg), len(plan.test_neg)) == (314, 157)

    def test_three_and_three(self):
        plan = split_dataset(dataset(3, 3), seed=1)
        assert (len(plan.train_pos), len(plan.test_pos), len(plan.train_neg), len(plan.test_neg)) == (2, 1, 2, 1)

    def test_deterministic(self):
        assert split_dataset(dataset(20, 30), 5) == split_dataset(dataset(20, 30), 5)

    def test_too_few_negatives(self):
        with pytest.raises(ValueError, match="negatives"):
            split_dataset(dataset(10, 9), 0)

    def test_too_few_positives(self):
        with pytest.raises(ValueError, match="at least 3"):
            split_dataset(dataset(2, 9), 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 60), st.integers(0, 40), st.integers(0, 2**31))
    def test_invariants(self, n_pos, extra, seed):
        plan = split_dataset(dataset(n_pos, n_pos + extra), seed)
        assert not set(plan.train_pos) & set(plan.test_pos)
        assert not set(plan.train_neg) & set(plan.test_neg)
        assert len(plan.train_neg) == len(plan.train_pos) == -(-2 * n_pos // 3)
        assert len(plan.test_neg) == len(plan.test_pos)
        assert set(plan.train_pos) | set(plan.test_pos) == {f"p{i:04d}" for i in range(n_pos)}

    def test_roundtrip(self):
        plan = split_dataset(dataset(9, 12), 3)
        assert SplitPlan.from_dict(plan.to_dict()) == plan


class TestExpansion:
    def test_frame_level_12x(self):
        ids = [f"v{i}" for i in range(10)]
        labels = {v: i % 2 for i, v in enumerate(ids)}
        feats = {v: np.zeros((12, 3)) for v in ids}
        X, y = expand_instances(feats, ids, labels)
        assert X.shape == (120, 3)
        assert y.sum() == 60

    def test_video_level(self):
        ids = [f"v{i}" for i in range(10)]
        X, y = expand_instances({v: np.zeros(6) for v in ids}, ids, {v: 1 for v in ids})
        assert X.shape == (10, 6) and y.tolist() == [1] * 10

    def test_wrong_row_count(self):
        with pytest.raises(ValueError, match="12"):
            instance_rows(Group.COMPOSITION, np.zeros((11, 17)))
        assert instance_rows(Group.FILMMAKING, np.zeros(6)).shape == (1, 6)


class TestVoting:
    def test_seven_of_twelve(self):
        label, _ = predict_video(StubClassifier([1] * 7 + [0] * 5, [0.5] * 12), np.zeros((12, 2)))
        assert label == 1

    def test_tie_goes_creative(self):
        label, _ = predict_video(StubClassifier([1] * 6 + [0] * 6, [0.5] * 12), np.zeros((12, 2)))
        assert label == 1

    def test_tie_configurable(self):
        stub = StubClassifier([1] * 6 + [0] * 6, [0.5] * 12)
        assert predict_video(stub, np.zeros((12, 2)), tie_creative=False)[0] == 0

    def test_all_zero_score_is_mean(self):
        scores = np.linspace(0.05, 0.4, 12)
        label, score = predict_video(StubClassifier([0] * 12, scores), np.zeros((12, 2)))
        assert label == 0 and score == pytest.approx(scores.mean(), abs=1e-15)

    def test_round_half_up(self):
        assert [round_half_up(x) for x in (0.49, 0.5, 7 / 12, 0.0, 1.0)] == [0, 1, 1, 0, 1]


class TestFusion:
    def test_three(self):
        assert fuse_median([0.2, 0.9, 0.6]) == (0.6, 1)

    def test_two(self):
        fused, label = fuse_median([0.2, 0.4])
        assert fused == pytest.approx(0.3) and label == 0

    def test_single(self):
        assert fuse_median([0.37]) == (0.37, 0)

    def test_empty(self):
        with pytest.raises(ValueError):
            fuse_median([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=7), st.randoms())
    def test_order_invariant(self, scores, rnd):
        shuffled = list(scores)
        rnd.shuffle(shuffled)
        assert fuse_median(shuffled) == fuse_median(scores)


class TestAccuracy:
    def test_cases(self):
        truth = {"a": 1, "b": 0, "c": 1, "d": 0}
        assert evaluate_accuracy(truth, truth) == 1.0
        assert evaluate_accuracy({k: 1 - v for k, v in truth.items()}, truth) == 0.0
        assert evaluate_accuracy({**truth, "d": 1}, truth) == 0.75

    def test_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            evaluate_accuracy({"a": 1}, {"b": 1})


def toy_features(n_pos=12, n_neg=12, seed=0):
    rng = np.random.default_rng(seed)
    ds = dataset(n_pos, n_neg, 0.6)
    feats = {Group.FILMMAKING: {}, Group.COMPOSITION: {}, Group.AUDIO_AFFECT: {}}
    for vid, lab in ds.entries:
        shift = 1.5 if lab else -1.5
        feats[Group.FILMMAKING][vid] = rng.normal(shift, 1.0, 6)
        feats[Group.COMPOSITION][vid] = rng.normal(shift, 1.0, (12, 17))
        feats[Group.AUDIO_AFFECT][vid] = rng.normal(0.0, 1.0, 6)
    return feats, ds


class TestExperiment:
    def test_runs_and_beats_chance(self):
        feats, ds = toy_features(30, 30)
        result, models = run_experiment(feats, ds, seed=0)
        assert set(models) == set(feats)
        assert result.group_accuracy[Group.FILMMAKING] > 0.5
        assert result.group_accuracy[Group.COMPOSITION] > 0.5
        assert "Selected groups" in result.fusion_accuracy
        assert "[D-60] test videos: 20" in result.format()

    def test_deterministic(self):
        feats, ds = toy_features()
        a, _ = run_experiment(feats, ds, seed=2)
        b, _ = run_experiment(feats, ds, seed=2)
        assert a.format() == b.format()
        assert [p.scores for p in a.predictions] == [p.scores for p in b.predictions]

    def test_fused_score_is_median(self):
        feats, ds = toy_features()
        result, _ = run_experiment(feats, ds, seed=0)
        for p in result.predictions:
            assert p.fused()[0] == float(np.median(list(p.scores.values())))

    def test_missing_video(self):
        feats, ds = toy_features()
        del feats[Group.FILMMAKING]["p0003"]
        with pytest.raises(ValueError, match="p0003"):
            run_experiment(feats, ds)

    def test_grid_search_picks_from_grid(self):
        feats, ds = toy_features(15, 15)
        split = split_dataset(ds, 0)
        C, gamma = select_hyperparameters(feats[Group.FILMMAKING], split, Group.FILMMAKING)
        assert C in (0.1, 1.0, 10.0)
        assert gamma * 6 == pytest.approx(min((0.1, 1.0, 10.0), key=lambda s: abs(s - gamma * 6)))
        model = train_group_model(feats[Group.FILMMAKING], split, Group.FILMMAKING, grid_search=True)
        assert model.C == C and model.gamma == gamma


class TestBundle:
    def test_roundtrip_bit_identical(self, tmp_path):
        feats, ds = toy_features()
        result, models = run_experiment(feats, ds, seed=1)
        path = tmp_path / "model.zip"
        save_bundle(path, models, result.split, {"seed": 1})
        loaded, split, meta = load_bundle(path)
        assert split == result.split
        assert meta["config"] == {"seed": 1}
        for g, model in models.items():
            rows = np.atleast_2d(next(iter(feats[g].values())))
            assert np.array_equal(loaded[g].score_instances(rows), model.score_instances(rows))
            assert np.all(np.abs(model.svc_.dual_coef_) <= model.C + 1e-12)

    def test_bytes_reproducible(self, tmp_path):
        feats, ds = toy_features()
        result, models = run_experiment(feats, ds, seed=1)
        save_bundle(tmp_path / "a.zip", models, result.split, {})
        save_bundle(tmp_path / "b.zip", models, result.split, {})
        assert (tmp_path / "a.zip").read_bytes() == (tmp_path / "b.zip").read_bytes()
        assert "split.json" in zipfile.ZipFile(tmp_path / "a.zip").namelist()


def test_group_classifier_monotone_calibration():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 4))
    y = (X[:, 0] > 0).astype(int)
    clf = GroupClassifier(Group.FILMMAKING).fit(X, y)
    probe = rng.standard_normal((100, 4))
    order = np.argsort(clf.decision_function(probe))
    assert np.all(np.diff(clf.score_instances(probe)[order]) >= 0)
