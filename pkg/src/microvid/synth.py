"""Synthetic micro-video corpora with known creative / non-creative structure.

Creative-style videos are loopable, have clean straight edges, a bright warm
palette and a quiet major chord.  The other style is shaky, noisy, dark and
cool, with loud noise bursts.  Each attribute (palette, motion, edges, audio)
follows the video's class with probability ``purity`` and is otherwise drawn
from the opposite style, so no single cue separates the classes perfectly.
"""

from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import DEFAULT_SAMPLE_RATE, MediaManifestEntry, SourceTag, write_manifest, write_wav

ATTRIBUTES = ("palette", "motion", "edges", "audio")


@dataclass(frozen=True)
class SynthConfig:
    size: int = 64
    n_frames: int = 24
    duration: float = 6.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    purity: float = 0.9


def _hsv_rgb(h: float, s: float, v: float) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb(h % 1.0, s, v))


def _stripes(size: int, angle: float, period: float, phase: float = 0.0) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    u = x * np.cos(angle) + y * np.sin(angle) + phase
    return (np.mod(u, period) < period * 0.3).astype(np.float64)


def make_frames(rng: np.random.Generator, style: dict[str, bool], cfg: SynthConfig) -> np.ndarray:
    """uint8 (N, H, W, 3) frames; ``style[attr]`` True selects the creative variant."""
    n, s = cfg.n_frames, cfg.size
    if style["palette"]:
        base = _hsv_rgb(rng.uniform(0.05, 0.14), rng.uniform(0.45, 0.75), rng.uniform(0.8, 0.95))
        ink = base * 0.45
    else:
        base = _hsv_rgb(rng.uniform(0.5, 0.72), rng.uniform(0.2, 0.5), rng.uniform(0.25, 0.45))
        ink = np.clip(base * 1.6, 0, 1)
    angle = rng.choice([0.0, np.pi / 2, np.pi / 4])
    period = rng.uniform(10, 16)
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    frames = np.empty((n, s, s, 3))
    for i in range(n):
        if style["edges"]:
            pattern = _stripes(s, angle, period)
        else:
            pattern = np.zeros((s, s))
            for _ in range(6):
                a = rng.uniform(0, np.pi)
                pattern = np.maximum(pattern, _stripes(s, a, rng.uniform(6, 20), rng.uniform(0, 20)) * (rng.random((s, s)) < 0.5))
        img = base[None, None, :] * (1 - pattern[..., None]) + ink[None, None, :] * pattern[..., None]
        if style["motion"]:
            t = 2 * np.pi * i / (n - 1)  # last frame repeats the first
            cx, cy = s / 2 + s / 4 * np.cos(t), s / 2 + s / 4 * np.sin(t)
        else:
            cx, cy = rng.uniform(0, s, size=2)
            img = np.roll(img, tuple(rng.integers(-4, 5, size=2)), axis=(0, 1))
            img = img + rng.normal(0, 0.12, size=img.shape)
        square = (np.abs(xx - cx) < s / 10) & (np.abs(yy - cy) < s / 10)
        img[square] = ink if style["palette"] else np.array([0.9, 0.9, 0.9])
        frames[i] = img
    return np.round(np.clip(frames, 0, 1) * 255).astype(np.uint8)


def make_audio(rng: np.random.Generator, creative: bool, cfg: SynthConfig) -> np.ndarray:
    sr = cfg.sample_rate
    t = np.arange(int(round(cfg.duration * sr))) / sr
    if creative:
        root = 130.81 * 2 ** (rng.integers(0, 12) / 12)
        amp = rng.uniform(0.04, 0.1)
        x = sum(np.sin(2 * np.pi * root * r * t + rng.uniform(0, 2 * np.pi)) for r in (1, 2 ** (4 / 12), 2 ** (7 / 12)))
        return amp * x * (0.8 + 0.2 * np.sin(2 * np.pi * 0.25 * t))
    x = rng.normal(0, 0.05, size=t.size)
    for start in rng.uniform(0, cfg.duration - 0.2, size=rng.integers(6, 14)):
        a, b = int(start * sr), int((start + rng.uniform(0.03, 0.15)) * sr)
        x[a:b] += rng.normal(0, rng.uniform(0.3, 0.6), size=b - a)
    return np.clip(x, -1, 1)


def draw_style(rng: np.random.Generator, creative: bool | None, purity: float) -> dict[str, bool]:
    if creative is None:
        return {a: bool(rng.random() < 0.5) for a in ATTRIBUTES}
    return {a: creative if rng.random() < purity else not creative for a in ATTRIBUTES}


def draw_votes(rng: np.random.Generator, creative: bool) -> list[str]:
    # non-creative clips draw firmer agreement so every filtered variant keeps
    # at least as many negatives as positives
    agree = rng.choice([5, 4, 3], p=[0.5, 0.35, 0.15] if creative else [0.7, 0.25, 0.05])
    major, minor = ("P", "N") if creative else ("N", "P")
    votes = [major] * agree + [minor] * (5 - agree)
    return [votes[i] for i in rng.permutation(5)]


def write_corpus(
    out_dir: str | Path,
    n_creative: int,
    n_other: int,
    n_background: int = 0,
    seed: int = 0,
    cfg: SynthConfig = SynthConfig(),
) -> dict[str, Path]:
    """Write frames (.npy), WAVs, ``manifest.jsonl``, ``annotations.csv`` and,
    if requested, ``background.jsonl``.  Returns the written index files."""
    out = Path(out_dir)
    media = out / "media"
    media.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    labeled, background, votes = [], [], []
    specs = [(f"v{i:04d}", True) for i in range(n_creative)]
    specs += [(f"v{i:04d}", False) for i in range(n_creative, n_creative + n_other)]
    specs += [(f"bg{i:04d}", None) for i in range(n_background)]
    for vid, creative in specs:
        vrng = np.random.default_rng(rng.integers(2**63))
        style = draw_style(vrng, creative, cfg.purity)
        np.save(media / f"{vid}.npy", make_frames(vrng, style, cfg))
        write_wav(media / f"{vid}.wav", make_audio(vrng, style["audio"], cfg), cfg.sample_rate)
        entry = MediaManifestEntry(vid, media / f"{vid}.npy", media / f"{vid}.wav", SourceTag.RANDOM)
        if creative is None:
            background.append(entry)
        else:
            labeled.append(entry)
            votes.append([vid, *draw_votes(vrng, creative)])
    paths = {"manifest": out / "manifest.jsonl", "annotations": out / "annotations.csv"}
    write_manifest(labeled, paths["manifest"])
    with open(paths["annotations"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "v1", "v2", "v3", "v4", "v5"])
        w.writerows(votes)
    if background:
        paths["background"] = out / "background.jsonl"
        write_manifest(background, paths["background"])
    return paths
