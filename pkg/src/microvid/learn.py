"""Train/test protocol: balanced split, per-group classifiers, frame voting, median fusion."""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_is_fitted

from .groups import FRAME_LEVEL, Group
from .ingest import LabeledDataset
from .svm import KernelSVC

BUNDLE_VERSION = 1
FRAMES_PER_VIDEO = 12
GRID_C = (0.1, 1.0, 10.0)
# multiples of the default width 1/dim
GRID_GAMMA = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_pos: tuple[str, ...]
    test_pos: tuple[str, ...]
    train_neg: tuple[str, ...]
    test_neg: tuple[str, ...]

    @property
    def train_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.train_pos + self.train_neg))

    @property
    def test_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.test_pos + self.test_neg))

    def labels(self) -> dict[str, int]:
        out = {v: 1 for v in self.train_pos + self.test_pos}
        out.update({v: 0 for v in self.train_neg + self.test_neg})
        return out

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(d["seed"], *(tuple(d[k]) for k in ("train_pos", "test_pos", "train_neg", "test_neg")))


def split_dataset(dataset: LabeledDataset, seed: int) -> SplitPlan:
    """Put ceil(2P/3) shuffled positives in train; draw as many negatives for each side."""
    pos = sorted(v for v, lab in dataset.entries if lab)
    neg = sorted(v for v, lab in dataset.entries if not lab)
    if len(pos) < 3:
        raise ValueError(f"need at least 3 positive videos, got {len(pos)}")
    if len(neg) < len(pos):
        raise ValueError(f"need at least as many negatives as positives ({len(neg)} < {len(pos)})")
    rng = np.random.default_rng(seed)
    pos = [pos[i] for i in rng.permutation(len(pos))]
    neg = [neg[i] for i in rng.permutation(len(neg))]
    n_train = -(-2 * len(pos) // 3)
    n_test = len(pos) - n_train
    return SplitPlan(
        seed,
        tuple(pos[:n_train]),
        tuple(pos[n_train:]),
        tuple(neg[:n_train]),
        tuple(neg[n_train:n_train + n_test]),
    )


class GroupClassifier(ClassifierMixin, BaseEstimator):
    """Train-set z-scoring followed by a calibrated RBF SVM for one feature group."""

    def __init__(self, group=None, C=1.0, gamma=None, tol=1e-3):
        self.group = group
        self.C = C
        self.gamma = gamma
        self.tol = tol

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        self.scaler_ = StandardScaler().fit(X)
        self.svc_ = KernelSVC(C=self.C, gamma=self.gamma, tol=self.tol).fit(self.scaler_.transform(X), y)
        self.classes_ = self.svc_.classes_
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "svc_")
        return self.svc_.decision_function(self.scaler_.transform(np.asarray(X, dtype=np.float64)))

    def predict(self, X):
        check_is_fitted(self, "svc_")
        return self.svc_.predict(self.scaler_.transform(np.asarray(X, dtype=np.float64)))

    def predict_proba(self, X):
        check_is_fitted(self, "svc_")
        return self.svc_.predict_proba(self.scaler_.transform(np.asarray(X, dtype=np.float64)))

    def score_instances(self, X) -> np.ndarray:
        """Calibrated probability of the creative class for each row."""
        return self.predict_proba(X)[:, 1]

    def to_dict(self) -> dict:
        check_is_fitted(self, "svc_")
        return {
            "group": None if self.group is None else str(self.group),
            "scaler_mean": self.scaler_.mean_.tolist(),
            "scaler_scale": self.scaler_.scale_.tolist(),
            "svc": self.svc_.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupClassifier":
        svc = KernelSVC.from_dict(d["svc"])
        m = cls(group=None if d["group"] is None else Group(d["group"]), C=svc.C, gamma=svc.gamma, tol=svc.tol)
        m.scaler_ = StandardScaler()
        m.scaler_.mean_ = np.array(d["scaler_mean"], dtype=np.float64)
        m.scaler_.scale_ = np.array(d["scaler_scale"], dtype=np.float64)
        m.scaler_.var_ = m.scaler_.scale_**2
        m.scaler_.n_features_in_ = len(m.scaler_.mean_)
        m.svc_ = svc
        m.classes_ = svc.classes_
        m.n_features_in_ = svc.n_features_in_
        return m


def expand_instances(
    features: Mapping[str, np.ndarray], ids: Sequence[str], labels: Mapping[str, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Stack each video's instance rows (12 for frame-level groups, 1 otherwise), each labelled like its video."""
    X, y = [], []
    for vid in ids:
        rows = np.atleast_2d(np.asarray(features[vid], dtype=np.float64))
        X.append(rows)
        y.extend([labels[vid]] * rows.shape[0])
    return np.vstack(X), np.asarray(y, dtype=int)


def instance_rows(group: Group, rows: np.ndarray, n_frames: int = FRAMES_PER_VIDEO) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    expected = n_frames if group in FRAME_LEVEL else 1
    if rows.shape[0] != expected:
        raise ValueError(f"{group.value} expects {expected} instance rows per video, got {rows.shape[0]}")
    return rows


def select_hyperparameters(
    features: Mapping[str, np.ndarray],
    split: SplitPlan,
    group: Group,
    seed: int = 0,
) -> tuple[float, float]:
    """Pick (C, gamma) from the 3x3 grid by video accuracy on a validation fold.

    A third of each class of training videos is held out; the rest trains
    each candidate.  Ties keep the earlier grid entry.
    """
    rng = np.random.default_rng(seed)
    fit_ids, val_ids = [], []
    for side in (split.train_pos, split.train_neg):
        side = sorted(side)
        order = [side[i] for i in rng.permutation(len(side))]
        n_val = max(1, len(order) // 3)
        val_ids += order[:n_val]
        fit_ids += order[n_val:]
    labels = split.labels()
    fit_ids, val_ids = sorted(fit_ids), sorted(val_ids)
    X, y = expand_instances({v: instance_rows(group, features[v]) for v in fit_ids}, fit_ids, labels)
    base = 1.0 / X.shape[1]
    best, best_acc = (1.0, base), -1.0
    for C in GRID_C:
        for scale in GRID_GAMMA:
            clf = GroupClassifier(group=group, C=C, gamma=scale * base).fit(X, y)
            pred = {v: predict_video(clf, features[v])[0] for v in val_ids}
            acc = evaluate_accuracy(pred, {v: labels[v] for v in val_ids})
            if acc > best_acc:
                best, best_acc = (C, scale * base), acc
    return best


def train_group_model(
    features: Mapping[str, np.ndarray],
    split: SplitPlan,
    group: Group,
    C: float = 1.0,
    gamma: float | None = None,
    grid_search: bool = False,
) -> GroupClassifier:
    labels = split.labels()
    ids = split.train_ids
    if grid_search:
        C, gamma = select_hyperparameters(features, split, group, split.seed)
    X, y = expand_instances({v: instance_rows(group, features[v]) for v in ids}, ids, labels)
    return GroupClassifier(group=group, C=C, gamma=gamma).fit(X, y)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def predict_video(classifier: GroupClassifier, rows, tie_creative: bool = True) -> tuple[int, float]:
    """(label, score) for one video from its instance rows.

    With several rows the label is the majority vote of the per-row labels
    and the score is the mean calibrated score.  A 6/6 tie goes to creative
    unless ``tie_creative`` is false.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    frame_labels = classifier.predict(rows).astype(float)
    scores = classifier.score_instances(rows)
    vote = float(frame_labels.mean())
    label = round_half_up(vote) if tie_creative else int(vote > 0.5)
    return label, float(scores.mean())


def fuse_median(scores: Sequence[float]) -> tuple[float, int]:
    if len(scores) == 0:
        raise ValueError("cannot fuse an empty set of scores")
    fused = float(np.median(np.asarray(scores, dtype=np.float64)))
    return fused, int(fused >= 0.5)


def evaluate_accuracy(predictions: Mapping[str, int], truth: Mapping[str, int]) -> float:
    if set(predictions) != set(truth):
        missing = sorted(set(truth) ^ set(predictions))
        raise ValueError(f"prediction and truth ids differ: {missing[:5]}")
    if not truth:
        raise ValueError("no predictions to evaluate")
    return sum(int(predictions[v]) == int(truth[v]) for v in truth) / len(truth)


@dataclass
class VideoPrediction:
    video_id: str
    scores: dict[Group, float] = field(default_factory=dict)
    labels: dict[Group, int] = field(default_factory=dict)

    def fused(self, groups: Sequence[Group] | None = None) -> tuple[float, int]:
        groups = list(self.scores) if groups is None else groups
        return fuse_median([self.scores[g] for g in groups])


FUSIONS: dict[str, tuple[Group, ...]] = {
    "Sensory": (Group.SCENE_CONTENT, Group.FILMMAKING, Group.COMPOSITION),
    "Emotional": (Group.VISUAL_AFFECT, Group.AUDIO_AFFECT),
    "All Aesthetic Value": (
        Group.SCENE_CONTENT, Group.FILMMAKING, Group.COMPOSITION, Group.VISUAL_AFFECT, Group.AUDIO_AFFECT,
    ),
    "Novelty": (Group.VISUAL_NOVELTY, Group.AUDIO_NOVELTY),
    "Novelty + Aesthetic Value": tuple(Group),
}


@dataclass
class ExperimentResult:
    tag: str
    split: SplitPlan
    group_accuracy: dict[Group, float]
    fusion_accuracy: dict[str, float]
    predictions: list[VideoPrediction]

    def rows(self) -> list[tuple[str, float]]:
        out = [(g.value, a) for g, a in self.group_accuracy.items()]
        out += [(f"Fusion: {name}", a) for name, a in self.fusion_accuracy.items()]
        return out

    def format(self) -> str:
        n_test = len(self.split.test_ids)
        lines = [f"[{self.tag}] test videos: {n_test} (balanced; chance = 0.50)"]
        lines += [f"  {name:<34s} {acc:.4f}" for name, acc in self.rows()]
        return "\n".join(lines)


def run_experiment(
    features: Mapping[Group, Mapping[str, np.ndarray]],
    dataset: LabeledDataset,
    seed: int = 0,
    groups: Sequence[Group] | None = None,
    C: float = 1.0,
    gamma: float | None = None,
    grid_search: bool = False,
    tie_creative: bool = True,
) -> tuple[ExperimentResult, dict[Group, GroupClassifier]]:
    """Split, train one classifier per group, predict the test videos, fuse."""
    groups = [g for g in Group if g in features] if groups is None else list(groups)
    for g in groups:
        if g not in features:
            raise ValueError(f"no features for group {g.value}")
        missing = [v for v, _ in dataset.entries if v not in features[g]]
        if missing:
            raise ValueError(f"{g.value} features missing for {len(missing)} videos, e.g. {missing[0]!r}")
    split = split_dataset(dataset, seed)
    truth = {v: lab for v, lab in split.labels().items() if v in set(split.test_ids)}
    models = {g: train_group_model(features[g], split, g, C, gamma, grid_search) for g in groups}
    preds = []
    for vid in split.test_ids:
        p = VideoPrediction(vid)
        for g, model in models.items():
            p.labels[g], p.scores[g] = predict_video(model, features[g][vid], tie_creative)
        preds.append(p)
    group_acc = {g: evaluate_accuracy({p.video_id: p.labels[g] for p in preds}, truth) for g in groups}
    fusion_acc = {}
    for name, members in FUSIONS.items():
        if all(m in models for m in members):
            fusion_acc[name] = evaluate_accuracy({p.video_id: p.fused(members)[1] for p in preds}, truth)
    if len(groups) > 1 and tuple(groups) not in FUSIONS.values():
        fusion_acc["Selected groups"] = evaluate_accuracy({p.video_id: p.fused(groups)[1] for p in preds}, truth)
    return ExperimentResult(dataset.tag, split, group_acc, fusion_acc, preds), models


# -- bundle -----------------------------------------------------------------


def config_hash(config: Mapping) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _zip_write(zf: zipfile.ZipFile, name: str, text: str) -> None:
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, text)


def save_bundle(path: str | Path, models: Mapping[Group, GroupClassifier], split: SplitPlan, config: Mapping) -> None:
    """Zip archive with one JSON file per group, the split plan and the config hash.

    Entry timestamps are fixed, so equal inputs give byte-identical files.
    """
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        meta = {
            "version": BUNDLE_VERSION,
            "groups": [g.value for g in models],
            "config": dict(config),
            "config_hash": config_hash(config),
        }
        _zip_write(zf, "bundle.json", json.dumps(meta, sort_keys=True, indent=1))
        _zip_write(zf, "split.json", json.dumps(split.to_dict(), sort_keys=True, indent=1))
        for g, m in models.items():
            _zip_write(zf, f"groups/{g.value}.json", json.dumps(m.to_dict(), sort_keys=True))
    Path(path).write_bytes(buf.getvalue())


def load_bundle(path: str | Path) -> tuple[dict[Group, GroupClassifier], SplitPlan, dict]:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("bundle.json"))
        if meta.get("version") != BUNDLE_VERSION:
            raise ValueError(f"unsupported bundle version {meta.get('version')}")
        split = SplitPlan.from_dict(json.loads(zf.read("split.json")))
        models = {
            Group(g): GroupClassifier.from_dict(json.loads(zf.read(f"groups/{g}.json"))) for g in meta["groups"]
        }
    return models, split, meta
