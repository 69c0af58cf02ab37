import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from microvid.analysis import mpc, pearson, rank_features
from microvid.groups import Group


def planted(n=5000, rhos=(0.3, 0.2, 0.1), seed=0):
    """Binary labels and columns whose population correlation with them is ``rhos``."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    z = (y - y.mean()) / y.std()
    cols = [r * z + np.sqrt(1 - r * r) * rng.standard_normal(n) for r in rhos]
    return np.column_stack(cols), y


class TestPearson:
    def test_hand_value(self):
        # cov 1.5, var_x 1, var_y 7/3 -> 1.5 / sqrt(7/3)
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9820, abs=1e-3)
        assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(1.5 / np.sqrt(7 / 3), abs=1e-12)

    def test_self_and_negation(self):
        x = np.random.default_rng(0).random(20)
        assert pearson(x, x) == pytest.approx(1.0)
        assert pearson(x, -x) == pytest.approx(-1.0)

    def test_constant_is_zero(self):
        assert pearson([1, 1, 1], [1, 2, 3]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            pearson([1, 2], [1, 2, 3])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        assert pearson(a * x + b, y) == pytest.approx(pearson(x, y), abs=1e-9)
        assert pearson(-x, y) == pytest.approx(-pearson(x, y), abs=1e-12)


class TestMPC:
    def test_one_dimensional_equals_abs_pearson(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(1000):
            n = rng.integers(5, 60)
            x = rng.standard_normal(n)
            y = rng.integers(0, 2, n)
            y[:2] = (0, 1)
            worst = max(worst, abs(mpc(x, y) - abs(pearson(x, y))))
        assert worst < 1e-12

    def test_exact_linear(self):
        X = np.random.default_rng(2).standard_normal((50, 3))
        assert mpc(X, X @ [1.0, -2.0, 0.5] + 3) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        assert mpc(x, y) == pytest.approx(0.0, abs=1e-9)

    def test_affine_column_change(self):
        X, y = planted(400)
        X2 = X.copy()
        X2[:, 0] = 10 * X2[:, 0] + 5
        assert mpc(X2, y) == pytest.approx(mpc(X, y), abs=1e-6)

    def test_zero_variance_target(self):
        with pytest.raises(ValueError, match="variance"):
            mpc(np.zeros((5, 2)), np.ones(5))

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (12, 3), elements=st.floats(-10, 10)), st.integers(0, 2**31))
    def test_range(self, X, seed):
        y = np.random.default_rng(seed).integers(0, 2, 12)
        y[:2] = (0, 1)
        assert 0.0 <= mpc(X, y) <= 1.0


class TestRanking:
    def test_planted_order(self):
        X, y = planted()
        report = rank_features({Group.FILMMAKING: X}, y, {Group.FILMMAKING: ["a", "b", "c"]})
        assert [n for n, _ in report.feature_rho] == ["a", "b", "c"]

    def test_label_copy_first(self):
        X, y = planted(200)
        feats = {Group.COMPOSITION: np.column_stack([X, y])}
        report = rank_features(feats, y)
        assert report.feature_rho[0] == ("Composition[3]", pytest.approx(1.0))

    def test_exclusions(self):
        X, y = planted(200)
        feats = {Group.SCENE_CONTENT: X, Group.VISUAL_NOVELTY: X, Group.AUDIO_AFFECT: X}
        report = rank_features(feats, y)
        assert all(n.startswith("AudioAffect") for n, _ in report.feature_rho)
        assert set(report.group_mpc) == set(feats)
        custom = rank_features(feats, y, exclusions=[Group.AUDIO_AFFECT])
        assert not any(n.startswith("AudioAffect") for n, _ in custom.feature_rho)

    def test_row_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            rank_features({Group.FILMMAKING: np.zeros((3, 2))}, [0, 1])

    def test_files(self, tmp_path):
        X, y = planted(300)
        report = rank_features({Group.FILMMAKING: X, Group.SCENE_CONTENT: X}, y, tag="D-80")
        paths = report.write(tmp_path)
        header = paths["csv"].read_text().splitlines()[0]
        assert header.startswith("# dataset: D-80") and "SceneContent" in header
        rows = list(csv.reader(line for line in paths["csv"].read_text().splitlines() if not line.startswith("#")))
        assert rows[0] == ["feature", "rho"] and len(rows) == 4
        assert float(rows[1][1]) == report.feature_rho[0][1]
        doc = json.loads(paths["json"].read_text())
        assert doc["dataset"] == "D-80" and doc["excluded_groups"][0] == "SceneContent"
        assert "excluded" in paths["dat"].read_text().splitlines()[0]
