"""Media manifests, asset decoding, frame sampling and annotation aggregation."""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import shlex
import subprocess
import wave
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 22050
FRAME_PATTERN = re.compile(r"frame_(\d+)\.png$")


class ManifestError(ValueError):
    """Malformed or inconsistent manifest / annotation input."""


class DecodeError(RuntimeError):
    """A media asset could not be decoded into frames and audio."""


class SourceTag(str, Enum):
    HASHTAG = "hashtag"
    BLOG = "blog"
    CREATOR = "creator"
    RANDOM = "random"


@dataclass(frozen=True)
class MediaManifestEntry:
    video_id: str
    frames_path: Path
    audio_path: Path
    source_tag: SourceTag = SourceTag.RANDOM


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class VideoAsset:
    """Decoded micro-video: ``frames`` is a ``uint8`` array of shape (N, H, W, 3)."""

    video_id: str
    frames: np.ndarray
    audio: AudioClip

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise DecodeError(f"{self.video_id}: frames must be (N, H, W, 3), got {self.frames.shape}")
        if self.n_frames < 2:
            raise DecodeError(f"{self.video_id}: n_frames < 2")

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    def frame(self, i: int) -> np.ndarray:
        """Frame ``i`` as float64 RGB in [0, 1]."""
        return self.frames[i].astype(np.float64) / 255.0

    def __iter__(self):
        for i in range(self.n_frames):
            yield self.frame(i)


@dataclass(frozen=True)
class DecodeConfig:
    target_rate: int = DEFAULT_SAMPLE_RATE
    decoder_cmd: str | None = None
    cache_dir: Path | None = field(
        default_factory=lambda: Path(os.environ["MICROVID_CACHE"]) if os.environ.get("MICROVID_CACHE") else None
    )


# -- manifest ---------------------------------------------------------------

_MANIFEST_KEYS = ("video_id", "frames_path", "audio_path", "source_tag")


def _resolve(base: Path, p: str) -> Path:
    return Path(os.path.normpath(base / p))


def load_manifest(path: str | Path) -> list[MediaManifestEntry]:
    """Parse a JSON-lines manifest.

    Relative media paths are resolved against the manifest's directory.
    Blank lines are ignored.
    """
    path = Path(path)
    base = path.parent
    entries: list[MediaManifestEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in _MANIFEST_KEYS[:3] if not rec.get(k)]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing or empty {', '.join(missing)}")
            try:
                tag = SourceTag(rec.get("source_tag", "random"))
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: unknown source_tag {rec['source_tag']!r}") from None
            vid = str(rec["video_id"])
            if vid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate video_id {vid!r}")
            seen.add(vid)
            entries.append(
                MediaManifestEntry(vid, _resolve(base, rec["frames_path"]), _resolve(base, rec["audio_path"]), tag)
            )
    return entries


def write_manifest(entries: Iterable[MediaManifestEntry], path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            rec = {
                "video_id": e.video_id,
                "frames_path": os.path.relpath(e.frames_path, path.parent),
                "audio_path": os.path.relpath(e.audio_path, path.parent),
                "source_tag": e.source_tag.value,
            }
            fh.write(json.dumps(rec) + "\n")


# -- decoding ---------------------------------------------------------------


def read_wav(path: str | Path) -> AudioClip:
    """Read integer PCM WAV as float samples in [-1, 1], averaged to mono."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_ch, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise DecodeError(f"unreadable WAV {path}: {exc}") from None
    if width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        data = v.astype(np.float64) / float(1 << 23)
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    else:
        raise DecodeError(f"unsupported sample width {width} in {path}")
    if data.size % n_ch:
        raise DecodeError(f"truncated WAV {path}")
    data = data.reshape(-1, n_ch)
    mono = data[:, 0] if n_ch == 1 else data.mean(axis=1)
    return AudioClip(mono, rate)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


def resample_linear(samples: np.ndarray, in_rate: int, out_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; identity when the rates match."""
    if in_rate == out_rate:
        return samples
    n_out = int(round(len(samples) * out_rate / in_rate))
    positions = np.arange(n_out) * (in_rate / out_rate)
    return np.interp(positions, np.arange(len(samples)), samples)


def _read_frames_dir(directory: Path) -> np.ndarray:
    numbered = []
    for p in directory.iterdir():
        m = FRAME_PATTERN.search(p.name)
        if m:
            numbered.append((int(m.group(1)), p))
    numbered.sort()
    frames = []
    for _, p in numbered:
        with Image.open(p) as im:
            frames.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
    if not frames:
        raise DecodeError(f"no frame_*.png files in {directory}")
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise DecodeError(f"mixed frame dimensions in {directory}: {sorted(shapes)}")
    return np.stack(frames)


def _read_frames_raw(path: Path) -> np.ndarray:
    arr = np.load(path, allow_pickle=False)
    if arr.dtype != np.uint8 or arr.ndim != 4 or arr.shape[-1] != 3:
        raise DecodeError(f"{path}: raw planar frames must be uint8 (N, H, W, 3)")
    return arr


def _run_decoder(entry: MediaManifestEntry, cfg: DecodeConfig) -> tuple[Path, Path]:
    outdir = (cfg.cache_dir or Path(entry.frames_path).parent / ".decoded") / entry.video_id
    outdir.mkdir(parents=True, exist_ok=True)
    if not any(outdir.glob("frame_*.png")):
        cmd = cfg.decoder_cmd.format(input=shlex.quote(str(entry.frames_path)), outdir=shlex.quote(str(outdir)))
        logger.info("decoding %s: %s", entry.video_id, cmd)
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        if proc.returncode != 0:
            raise DecodeError(f"{entry.video_id}: decoder exited {proc.returncode}: {proc.stderr.strip()[:200]}")
    audio = entry.audio_path if Path(entry.audio_path).is_file() else outdir / "audio.wav"
    return outdir, audio


def decode_asset(entry: MediaManifestEntry, cfg: DecodeConfig | None = None) -> VideoAsset:
    """Load frames and audio for one manifest entry.

    ``frames_path`` is either a directory of ``frame_%05d.png`` files or a
    ``.npy`` file holding a uint8 (N, H, W, 3) stack.  Any other file is
    handed to ``cfg.decoder_cmd``, which must write numbered PNGs (and
    ``audio.wav`` if the manifest's audio path does not exist) into ``{outdir}``.
    """
    cfg = cfg or DecodeConfig()
    frames_path, audio_path = Path(entry.frames_path), Path(entry.audio_path)
    if frames_path.is_dir():
        frames = _read_frames_dir(frames_path)
    elif frames_path.suffix == ".npy" and frames_path.is_file():
        frames = _read_frames_raw(frames_path)
    elif cfg.decoder_cmd and frames_path.is_file():
        outdir, audio_path = _run_decoder(entry, cfg)
        frames = _read_frames_dir(outdir)
    else:
        raise DecodeError(f"{entry.video_id}: cannot read frames from {frames_path}")
    if frames.shape[0] < 2:
        raise DecodeError(f"{entry.video_id}: n_frames < 2")
    clip = read_wav(audio_path)
    samples = resample_linear(clip.samples, clip.sample_rate, cfg.target_rate)
    return VideoAsset(entry.video_id, frames, AudioClip(samples, cfg.target_rate))


def sample_frame_indices(n_frames: int, n: int = 12) -> list[int]:
    if n < 1 or n_frames < 1:
        raise ValueError("need n >= 1 and at least one frame")
    if n == 1:
        return [n_frames // 2]
    return [(i * (n_frames - 1)) // (n - 1) for i in range(n)]


def sample_frames(asset: VideoAsset, n: int = 12) -> list[np.ndarray]:
    """``n`` evenly spaced frames; ``n == 1`` gives the middle frame."""
    return [asset.frame(i) for i in sample_frame_indices(asset.n_frames, n)]


# -- annotations ------------------------------------------------------------


class Vote(str, Enum):
    POSITIVE = "P"
    NEGATIVE = "N"
    DONT_KNOW = "U"


@dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    votes: tuple[Vote, ...]

    def __post_init__(self):
        if len(self.votes) != 5:
            raise ManifestError(f"{self.video_id}: expected 5 votes, got {len(self.votes)}")


@dataclass(frozen=True)
class LabeledDataset:
    threshold: float
    entries: tuple[tuple[str, bool], ...]

    @property
    def n_creative(self) -> int:
        return sum(1 for _, lab in self.entries if lab)

    @property
    def n_noncreative(self) -> int:
        return len(self.entries) - self.n_creative

    @property
    def labels(self) -> dict[str, bool]:
        return dict(self.entries)

    @property
    def tag(self) -> str:
        return f"D-{round(self.threshold * 100)}"


def read_annotations(path: str | Path) -> list[AnnotationRecord]:
    """CSV ``video_id,vote1..vote5`` with votes in {P, N, U}; a header row is optional."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip().lower() == "video_id":
                continue
            if len(row) != 6:
                raise ManifestError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
            try:
                votes = tuple(Vote(v.strip().upper()) for v in row[1:])
            except ValueError:
                raise ManifestError(f"{path}:{lineno}: votes must be P, N or U") from None
            records.append(AnnotationRecord(row[0].strip(), votes))
    return records


def agreement(votes: Sequence[Vote]) -> tuple[float, bool, int]:
    """(agreement among decisive votes, majority-is-creative, number of decisive votes)."""
    pos = sum(v is Vote.POSITIVE for v in votes)
    neg = sum(v is Vote.NEGATIVE for v in votes)
    decisive = pos + neg
    if decisive == 0:
        return 0.0, False, 0
    return max(pos, neg) / decisive, pos > neg, decisive


MIN_DECISIVE_VOTES = 3


def derive_dataset(annotations: Iterable[AnnotationRecord], threshold: float) -> LabeledDataset:
    """Keep videos whose decisive-vote agreement reaches ``threshold``.

    "Don't know" votes are left out of both numerator and denominator, and
    videos with fewer than three decisive votes are dropped.  Entries are
    sorted by video id.
    """
    if not 0.5 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0.5, 1.0], got {threshold}")
    kept = []
    for rec in annotations:
        agree, creative, decisive = agreement(rec.votes)
        if decisive >= MIN_DECISIVE_VOTES and agree >= threshold - 1e-9:
            kept.append((rec.video_id, creative))
    kept.sort()
    return LabeledDataset(threshold, tuple(kept))


def parse_threshold(value) -> float:
    """Accept 60/80/100 or 0.6/0.8/1.0."""
    v = float(value)
    if v > 1.0:
        v /= 100.0
    if round(v, 6) not in (0.6, 0.8, 1.0):
        raise ValueError(f"threshold must be one of 60, 80, 100 (got {value})")
    return round(v, 6)


def write_dataset(ds: LabeledDataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "creative"])
        for vid, lab in ds.entries:
            w.writerow([vid, int(lab)])
