"""Per-video extraction of all feature groups, and the on-disk feature tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import audioaffect, sensory, visaffect
from .groups import ATTRIBUTE_GROUPS, FRAME_LEVEL, NOVELTY_GROUPS, VISUAL_ATTRIBUTES, Group, group_dim
from .ingest import VideoAsset, sample_frame_indices
from .novelty import NoveltyModel


def feature_names(group: Group, extended_affect: bool = False) -> tuple[str, ...]:
    group = Group(group)
    if group is Group.SCENE_CONTENT:
        bands = [f"gabor_o{o}_s{s}_c{c}" for o in range(6) for s in range(3) for c in range(25)]
        moments = [f"sr_{ch}_{m}" for ch in ("rg", "by", "i") for m in ("mean", "var", "skew", "kurt")]
        return tuple(bands + moments)
    if group is Group.FILMMAKING:
        return sensory.FILMMAKING_NAMES
    if group is Group.COMPOSITION:
        return sensory.COMPOSITION_NAMES
    if group is Group.VISUAL_AFFECT:
        return visaffect.EXTENDED_NAMES if extended_affect else visaffect.TABLE_NAMES
    if group is Group.AUDIO_AFFECT:
        return audioaffect.NAMES
    if group is Group.VISUAL_NOVELTY:
        return tuple(f"dist_{g.value}_{j}" for g in VISUAL_ATTRIBUTES for j in range(10))
    return tuple(f"dist_AudioAffect_{j}" for j in range(10))


def frame_features(group: Group, frame, mean_spectrum=None, extended_affect: bool = False) -> np.ndarray:
    if group is Group.SCENE_CONTENT:
        return sensory.scene_content(frame)
    if group is Group.COMPOSITION:
        return sensory.composition(frame, mean_spectrum)
    if group is Group.VISUAL_AFFECT:
        return visaffect.visual_affect(frame, extended=extended_affect)
    raise ValueError(f"{group.value} is not a frame-level group")


@dataclass
class VideoFeatures:
    """``instances[g]`` holds the training rows (12 sampled frames or one video row);
    ``summary[g]`` is the single representative vector (middle frame for frame-level groups)."""

    video_id: str
    instances: dict[Group, np.ndarray] = field(default_factory=dict)
    summary: dict[Group, np.ndarray] = field(default_factory=dict)


def extract_video(
    asset: VideoAsset,
    groups: Sequence[Group],
    mean_spectrum=None,
    novelty_model: NoveltyModel | None = None,
    extended_affect: bool = False,
    n_frames: int = 12,
) -> VideoFeatures:
    groups = [Group(g) for g in groups]
    if mean_spectrum is None and novelty_model is not None:
        mean_spectrum = novelty_model.mean_spectrum_
    wanted = set(groups)
    if wanted & set(NOVELTY_GROUPS):
        if novelty_model is None:
            raise ValueError("novelty groups need a fitted novelty model")
        wanted |= set(ATTRIBUTE_GROUPS)
    if Group.COMPOSITION in wanted and mean_spectrum is None:
        raise ValueError("Composition needs the corpus mean spectrum")

    out = VideoFeatures(asset.video_id)
    mid = asset.frame(asset.n_frames // 2)
    sampled = [asset.frame(i) for i in sample_frame_indices(asset.n_frames, n_frames)]
    for g in (g for g in Group if g in wanted and g in FRAME_LEVEL):
        out.summary[g] = frame_features(g, mid, mean_spectrum, extended_affect)
        if g in groups:
            out.instances[g] = np.vstack([frame_features(g, f, mean_spectrum, extended_affect) for f in sampled])
    if Group.FILMMAKING in wanted:
        out.summary[Group.FILMMAKING] = sensory.filmmaking(asset)
    if Group.AUDIO_AFFECT in wanted:
        out.summary[Group.AUDIO_AFFECT] = audioaffect.audio_affect(asset.audio)
    if novelty_model is not None and wanted & set(NOVELTY_GROUPS):
        visual, audio = novelty_model.transform({g: out.summary[g] for g in ATTRIBUTE_GROUPS})
        out.summary[Group.VISUAL_NOVELTY], out.summary[Group.AUDIO_NOVELTY] = visual, audio
    for g in groups:
        if g not in FRAME_LEVEL:
            out.instances[g] = out.summary[g][None, :]
    for g, v in out.summary.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite {g.value} feature for video {asset.video_id!r}")
    out.summary = {g: out.summary[g] for g in groups}
    return out


class GroupFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping frames (frame-level groups) or
    ``VideoAsset`` objects (video-level groups) to rows of one feature group."""

    def __init__(self, group=Group.VISUAL_AFFECT, mean_spectrum=None, extended_affect=False, novelty_model=None):
        self.group = group
        self.mean_spectrum = mean_spectrum
        self.extended_affect = extended_affect
        self.novelty_model = novelty_model

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        g = Group(self.group)
        if g in FRAME_LEVEL:
            rows = [frame_features(g, f, self.mean_spectrum, self.extended_affect) for f in X]
        else:
            rows = [
                extract_video(a, [g], self.mean_spectrum, self.novelty_model, self.extended_affect).summary[g]
                for a in X
            ]
        return np.vstack(rows) if rows else np.zeros((0, group_dim(g, self.extended_affect)))


# -- tables -----------------------------------------------------------------


class FeatureTable:
    """Video-level rows per group plus per-frame instance rows for frame-level groups."""

    def __init__(self):
        self.summary: dict[Group, dict[str, np.ndarray]] = {}
        self.frames: dict[Group, dict[str, np.ndarray]] = {}

    def add(self, vf: VideoFeatures) -> None:
        for g, v in vf.summary.items():
            self.summary.setdefault(g, {})[vf.video_id] = np.asarray(v, dtype=np.float64)
        for g, rows in vf.instances.items():
            if g in FRAME_LEVEL:
                self.frames.setdefault(g, {})[vf.video_id] = np.asarray(rows, dtype=np.float64)

    @property
    def groups(self) -> tuple[Group, ...]:
        return tuple(g for g in Group if g in self.summary)

    def ids(self, group: Group) -> list[str]:
        return sorted(self.summary.get(group, {}))

    def complete_ids(self, groups: Iterable[Group]) -> set[str]:
        sets = []
        for g in groups:
            done = set(self.summary.get(g, {}))
            if g in FRAME_LEVEL:
                done &= set(self.frames.get(g, {}))
            sets.append(done)
        return set.intersection(*sets) if sets else set()

    def instances(self, group: Group) -> dict[str, np.ndarray]:
        if group in FRAME_LEVEL:
            if group not in self.frames:
                raise KeyError(f"no per-frame rows for {group.value}")
            return self.frames[group]
        return {v: x[None, :] for v, x in self.summary[group].items()}

    def matrix(self, group: Group, ids: Sequence[str]) -> np.ndarray:
        table = self.summary[group]
        missing = [v for v in ids if v not in table]
        if missing:
            raise KeyError(f"{group.value} has no row for {missing[0]!r}")
        return np.vstack([table[v] for v in ids])

    def per_video(self, groups: Sequence[Group]) -> dict[str, dict[Group, np.ndarray]]:
        ids = set.intersection(*(set(self.summary.get(g, {})) for g in groups))
        return {v: {g: self.summary[g][v] for g in groups} for v in sorted(ids)}

    # CSV: floats written with repr so reloading is exact
    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for g in self.groups:
            _write_csv(d / f"{g.value}.csv", self.summary[g], with_index=False)
            if g in self.frames:
                _write_csv(d / f"{g.value}.frames.csv", self.frames[g], with_index=True)

    @classmethod
    def load(cls, directory: str | Path, groups: Iterable[Group] | None = None) -> "FeatureTable":
        d = Path(directory)
        table = cls()
        for g in Group if groups is None else groups:
            g = Group(g)
            path = d / f"{g.value}.csv"
            if not path.exists():
                if groups is not None:
                    raise FileNotFoundError(f"feature table for group {g.value} not found in {d}")
                continue
            table.summary[g] = {v: rows[0] for v, rows in _read_csv(path, with_index=False).items()}
            fpath = d / f"{g.value}.frames.csv"
            if fpath.exists():
                table.frames[g] = _read_csv(fpath, with_index=True)
        return table

    def save_npz(self, path: str | Path) -> None:
        arrays = {}
        for g in self.groups:
            ids = self.ids(g)
            arrays[f"{g.value}/ids"] = np.array(ids)
            arrays[f"{g.value}/summary"] = self.matrix(g, ids)
            if g in self.frames:
                arrays[f"{g.value}/frames"] = np.stack([self.frames[g][v] for v in ids])
        np.savez_compressed(path, **arrays)

    @classmethod
    def load_npz(cls, path: str | Path) -> "FeatureTable":
        table = cls()
        with np.load(path) as z:
            for g in Group:
                if f"{g.value}/ids" not in z:
                    continue
                ids = [str(v) for v in z[f"{g.value}/ids"]]
                table.summary[g] = dict(zip(ids, z[f"{g.value}/summary"]))
                if f"{g.value}/frames" in z:
                    table.frames[g] = dict(zip(ids, z[f"{g.value}/frames"]))
        return table


def _write_csv(path: Path, rows: Mapping[str, np.ndarray], with_index: bool) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        first = next(iter(rows.values()), None)
        dim = 0 if first is None else np.atleast_2d(first).shape[1]
        w.writerow(["video_id", *(["frame"] if with_index else []), *(f"f{i}" for i in range(dim))])
        for vid in sorted(rows):
            block = np.atleast_2d(rows[vid])
            for k, r in enumerate(block):
                w.writerow([vid, *([k] if with_index else []), *(repr(float(x)) for x in r)])


def _read_csv(path: Path, with_index: bool) -> dict[str, np.ndarray]:
    out: dict[str, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "video_id":
            raise ValueError(f"{path}: not a feature table")
        start = 2 if with_index else 1
        for lineno, row in enumerate(reader, 2):
            try:
                out.setdefault(row[0], []).append([float(x) for x in row[start:]])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return {v: np.array(r, dtype=np.float64) for v, r in out.items()}
