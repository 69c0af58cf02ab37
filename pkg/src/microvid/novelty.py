"""Cluster-distance novelty: per-group K-means over a background corpus.

A video's novelty in one attribute space is its vector of distances to all
``k`` centroids of that space, not just the nearest one.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import imgproc as ip
from .groups import ATTRIBUTE_GROUPS, VISUAL_ATTRIBUTES, Group

FORMAT = "microvid-novelty"
VERSION = 1


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding (D^2 sampling)."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = np.sum(X**2, axis=1)[:, None] - 2.0 * X @ C.T + np.sum(C**2, axis=1)[None, :]
    return np.maximum(d, 0.0)


def lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300, tol: float = 1e-6):
    """Lloyd iterations until the largest centroid shift drops below ``tol``.

    An emptied cluster is re-seeded at the point farthest from its centroid.
    Returns ``(centers, labels, inertia, n_iter)``.
    """
    centers = centers.copy()
    k = centers.shape[0]
    for it in range(1, max_iter + 1):
        d = _sq_distances(X, centers)
        labels = d.argmin(axis=1)
        new = np.empty_like(centers)
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                far = int(d[np.arange(len(X)), labels].argmax())
                new[j] = X[far]
                labels[far] = j
        shift = np.sqrt(np.max(np.sum((new - centers) ** 2, axis=1)))
        centers = new
        if shift < tol:
            break
    d = _sq_distances(X, centers)
    labels = d.argmin(axis=1)
    return centers, labels, float(d[np.arange(len(X)), labels].sum()), it


def canonical_order(centers: np.ndarray) -> np.ndarray:
    """Sort centroids by first coordinate, ties broken by the following ones."""
    return centers[np.lexsort(centers.T[::-1])]


class AttributeSpace(TransformerMixin, BaseEstimator):
    """Z-scored K-means partition of one attribute space.

    ``transform`` returns the Euclidean distances (in scaled space) from each
    row to every centroid, in canonical centroid order.  Zero-variance
    columns of the fitting corpus are dropped and recorded in ``keep_``.
    """

    def __init__(self, n_clusters=10, max_iter=300, tol=1e-6, n_init=4, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < self.n_clusters:
            raise ValueError(f"need at least {self.n_clusters} samples to fit, got {X.shape[0]}")
        std = X.std(axis=0)
        self.keep_ = std > 1e-12
        self.mean_ = X.mean(axis=0)[self.keep_]
        self.scale_ = std[self.keep_]
        self.n_features_in_ = X.shape[1]
        Z = self._scale(X)
        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(self.n_init):
            seeds = kmeans_plusplus(Z, self.n_clusters, rng)
            centers, _, inertia, n_iter = lloyd(Z, seeds, self.max_iter, self.tol)
            if best is None or inertia < best[1]:
                best = (centers, inertia, n_iter)
        self.cluster_centers_ = canonical_order(best[0])
        self.inertia_ = best[1]
        self.n_iter_ = best[2]
        return self

    def _scale(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.keep_] - self.mean_) / self.scale_

    def transform(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return cdist(self._scale(X), self.cluster_centers_)

    @property
    def centers_in_input_space(self) -> np.ndarray:
        """Centroids mapped back to input units; dropped columns take the corpus mean."""
        check_is_fitted(self, "cluster_centers_")
        out = np.zeros((self.cluster_centers_.shape[0], self.n_features_in_))
        out[:, self.keep_] = self.cluster_centers_ * self.scale_ + self.mean_
        return out

    def to_dict(self) -> dict:
        check_is_fitted(self, "cluster_centers_")
        return {
            "n_features": int(self.n_features_in_),
            "keep": [bool(b) for b in self.keep_],
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "centroids": self.cluster_centers_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, **params) -> "AttributeSpace":
        space = cls(n_clusters=len(d["centroids"]), **params)
        space.n_features_in_ = int(d["n_features"])
        space.keep_ = np.array(d["keep"], dtype=bool)
        space.mean_ = np.array(d["mean"], dtype=np.float64)
        space.scale_ = np.array(d["scale"], dtype=np.float64)
        space.cluster_centers_ = np.array(d["centroids"], dtype=np.float64)
        return space


def corpus_mean_spectrum(frames: Iterable) -> np.ndarray:
    """Elementwise mean of the 64x64 log-amplitude spectra of ``frames``."""
    total, count = None, 0
    for f in frames:
        spec = ip.log_amplitude_spectrum(ip.to_gray(f))
        total = spec if total is None else total + spec
        count += 1
    if count == 0:
        raise ValueError("empty corpus: cannot compute a mean spectrum")
    return total / count


class NoveltyModel(BaseEstimator):
    """Five attribute spaces (four visual, one audio) plus the corpus mean spectrum.

    ``fit`` takes a mapping ``video_id -> {Group: vector}``; frame-level
    groups are represented by their middle-frame vector.  Rows are sorted by
    video id before clustering, so the model does not depend on input order.
    """

    def __init__(self, n_clusters=10, random_state=0, n_init=4):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.n_init = n_init

    def fit(self, background: Mapping[str, Mapping[Group, np.ndarray]], mean_spectrum=None):
        ids = sorted(background)
        if len(ids) < self.n_clusters:
            raise ValueError(f"background corpus has {len(ids)} videos, need at least {self.n_clusters}")
        self.spaces_ = {}
        for group in ATTRIBUTE_GROUPS:
            rows = []
            for vid in ids:
                if group not in background[vid]:
                    raise ValueError(f"video {vid!r} lacks group {group.value}")
                v = np.asarray(background[vid][group], dtype=np.float64)
                if not np.all(np.isfinite(v)):
                    raise ValueError(f"non-finite {group.value} feature for video {vid!r}")
                rows.append(v)
            space = AttributeSpace(self.n_clusters, n_init=self.n_init, random_state=self.random_state)
            self.spaces_[group] = space.fit(np.vstack(rows))
        self.mean_spectrum_ = None if mean_spectrum is None else np.asarray(mean_spectrum, dtype=np.float64)
        self.corpus_size_ = len(ids)
        return self

    def transform(self, features: Mapping[Group, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """(visual novelty of length 4k, audio novelty of length k) for one video."""
        check_is_fitted(self, "spaces_")
        dist = {}
        for group in ATTRIBUTE_GROUPS:
            if group not in features:
                raise ValueError(f"missing {group.value} features")
            dist[group] = self.spaces_[group].transform(np.asarray(features[group], dtype=np.float64)[None, :])[0]
        visual = np.concatenate([dist[g] for g in VISUAL_ATTRIBUTES])
        return visual, dist[Group.AUDIO_AFFECT]

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        check_is_fitted(self, "spaces_")
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "k": self.n_clusters,
            "seed": self.random_state,
            "n_init": self.n_init,
            "corpus_size": self.corpus_size_,
            "spaces": {g.value: s.to_dict() for g, s in self.spaces_.items()},
            "mean_spectrum": None if self.mean_spectrum_ is None else self.mean_spectrum_.tolist(),
        }
        return json.dumps(doc, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "NoveltyModel":
        doc = json.loads(text)
        if doc.get("format") != FORMAT:
            raise ValueError("not a novelty model file")
        if doc.get("version") != VERSION:
            raise ValueError(f"unsupported novelty model version {doc.get('version')}")
        model = cls(n_clusters=doc["k"], random_state=doc["seed"], n_init=doc.get("n_init", 4))
        model.spaces_ = {Group(g): AttributeSpace.from_dict(d) for g, d in doc["spaces"].items()}
        spec = doc.get("mean_spectrum")
        model.mean_spectrum_ = None if spec is None else np.array(spec, dtype=np.float64)
        model.corpus_size_ = doc["corpus_size"]
        return model

    @classmethod
    def load(cls, path: str | Path) -> "NoveltyModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_novelty_model(background, k: int = 10, seed: int = 0, mean_spectrum=None) -> NoveltyModel:
    return NoveltyModel(n_clusters=k, random_state=seed).fit(background, mean_spectrum)


def novelty_vector(features, model: NoveltyModel) -> tuple[np.ndarray, np.ndarray]:
    return model.transform(features)
