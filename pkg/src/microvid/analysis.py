"""Correlation of features with creativity labels: per-group MPC and per-feature Pearson."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .groups import Group

RIDGE = 1e-6
DEFAULT_EXCLUDED = (Group.SCENE_CONTENT, Group.VISUAL_NOVELTY, Group.AUDIO_NOVELTY)

# correlations quoted for the original data; kept for reference only
REFERENCE_RHO = {"pleasure": 0.24, "dominance": 0.23, "symmetry": 0.04, "low_dof": 0.02}


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least two observations")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx <= 0 or syy <= 0:
        return 0.0
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def mpc(X, y, ridge: float = RIDGE) -> float:
    """|corr(ŷ, y)| for the least-squares fit of ``y`` on ``X`` with intercept."""
    X = np.asarray(X, dtype=np.float64)
    X = X[:, None] if X.ndim == 1 else X
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows, y has {y.size}")
    if np.ptp(y) == 0:
        raise ValueError("target has zero variance")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    # scale columns so the ridge term acts on a common footing
    norms = np.sqrt(np.sum(Xc**2, axis=0))
    keep = norms > 0
    if not keep.any():
        return 0.0
    Z = Xc[:, keep] / norms[keep]
    beta = np.linalg.solve(Z.T @ Z + ridge * np.eye(Z.shape[1]), Z.T @ yc)
    return abs(pearson(Z @ beta, y))


@dataclass
class CorrelationReport:
    tag: str
    group_mpc: dict[Group, float]
    feature_rho: list[tuple[str, float]]
    excluded: tuple[Group, ...]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "feature_rho.csv", "json": out / "group_mpc.json", "dat": out / "feature_rho.dat"}
        with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# dataset: {self.tag}; excluded groups: {','.join(g.value for g in self.excluded)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "rho"])
            for name, rho in self.feature_rho:
                w.writerow([name, repr(rho)])
        doc = {
            "dataset": self.tag,
            "excluded_groups": [g.value for g in self.excluded],
            "mpc": {g.value: v for g, v in self.group_mpc.items()},
        }
        paths["json"].write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        with open(paths["dat"], "w", encoding="utf-8") as fh:
            fh.write(f"# {self.tag} per-feature Pearson rho, sorted by |rho|; excluded: "
                     f"{' '.join(g.value for g in self.excluded)}\n# rank feature rho\n")
            for i, (name, rho) in enumerate(self.feature_rho, 1):
                fh.write(f"{i} {name} {rho!r}\n")
        return paths


def rank_features(
    features: Mapping[Group, np.ndarray],
    labels: Sequence,
    names: Mapping[Group, Sequence[str]] | None = None,
    exclusions: Sequence[Group] = DEFAULT_EXCLUDED,
    tag: str = "",
) -> CorrelationReport:
    """MPC for every group and Pearson rho for each feature of the non-excluded groups.

    ``features[g]`` is an (n_videos, dim) matrix aligned with ``labels``.
    Features are sorted by decreasing |rho|, ties by name.
    """
    y = np.asarray(labels, dtype=np.float64)
    excluded = tuple(Group(g) for g in exclusions)
    group_mpc = {}
    ranked = []
    for g, X in features.items():
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != y.size:
            raise ValueError(f"{g.value} has {X.shape[0]} rows, labels have {y.size}")
        group_mpc[g] = mpc(X, y)
        if g in excluded:
            continue
        cols = names[g] if names and g in names else [f"{g.value}[{i}]" for i in range(X.shape[1])]
        ranked.extend((str(n), pearson(X[:, i], y)) for i, n in enumerate(cols))
    ranked.sort(key=lambda t: (-abs(t[1]), t[0]))
    return CorrelationReport(tag, group_mpc, ranked, excluded)
