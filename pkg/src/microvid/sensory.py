"""Sensory aesthetic features: scene content, filmmaking technique, composition.

Scene content (462 values) layout:

* 450 = 18 log-Gabor band-pass filters (6 orientations x 3 radial bands)
  applied in the frequency domain to the intensity saliency map, with
  response magnitudes averaged over a 5x5 spatial grid, filter-major;
* 12 = mean, variance, skewness and excess kurtosis of the spectral
  residual saliency map of the RG, BY and intensity opponent channels.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import imgproc as ip
from .ingest import VideoAsset

SHOT_THRESHOLD = 0.30
CHANGE_EPSILON = 0.01
SHAKE_SIZE = 128

FILMMAKING_NAMES = ("n_frames", "n_shots", "stop_motion", "loop", "movement", "camera_shake")
COMPOSITION_NAMES = (
    "hue_rot", "saturation_rot", "brightness_rot",
    *(f"ldof_{c}{lvl}" for c in "hsv" for lvl in (1, 2, 3)),
    "contrast", "symmetry", "uniqueness", "order_entropy", "order_complexity",
)


# -- scene content ----------------------------------------------------------


@lru_cache(maxsize=1)
def _gabor_bank(size: int = ip.ANALYSIS_SIZE) -> np.ndarray:
    fy, fx = np.meshgrid(np.fft.fftfreq(size), np.fft.fftfreq(size), indexing="ij")
    radius = np.hypot(fx, fy)
    angle = np.arctan2(fy, fx)
    safe = np.where(radius > 0, radius, 1.0)
    bank = []
    for o in range(6):
        theta = o * np.pi / 6
        d = np.angle(np.exp(1j * (angle - theta)))
        d = np.minimum(np.abs(d), np.pi - np.abs(d))
        angular = np.exp(-(d**2) / (2 * (np.pi / 12) ** 2))
        for f0 in (0.25, 0.125, 0.0625):
            radial = np.exp(-(np.log(safe / f0) ** 2) / (2 * np.log(0.55) ** 2))
            bank.append(np.where(radius > 0, radial * angular, 0.0))
    return np.stack(bank)


def _grid_means(a: np.ndarray, cells: int = 5) -> np.ndarray:
    rows = np.array_split(np.arange(a.shape[-2]), cells)
    cols = np.array_split(np.arange(a.shape[-1]), cells)
    return np.stack(
        [a[..., r[0]:r[-1] + 1, c[0]:c[-1] + 1].mean(axis=(-2, -1)) for r in rows for c in cols], axis=-1
    )


def _moments(m: np.ndarray) -> list[float]:
    mu = float(m.mean())
    var = float(m.var())
    if var <= (1e-12 * max(abs(mu), 1e-300)) ** 2:
        return [mu, 0.0, 0.0, 0.0]
    z = (m - mu) / np.sqrt(var)
    return [mu, var, float(np.mean(z**3)), float(np.mean(z**4) - 3.0)]


def scene_content(frame) -> np.ndarray:
    rgb = ip.resize_bilinear(ip.as_frame(frame), ip.ANALYSIS_SIZE, ip.ANALYSIS_SIZE)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    intensity = (r + g + b) / 3.0
    sal = ip.spectral_residual(intensity) * intensity.size
    spectrum = np.fft.fft2(sal)
    responses = np.abs(np.fft.ifft2(spectrum[None] * _gabor_bank()))
    banded = _grid_means(responses).ravel()
    moments = []
    for channel in (r - g, b - (r + g) / 2.0, intensity):
        moments.extend(_moments(ip.spectral_residual(channel)))
    return np.concatenate([banded, moments])


# -- filmmaking technique ---------------------------------------------------


def _consecutive_distances(asset: VideoAsset) -> np.ndarray:
    thumbs = [ip.thumbnail(f) for f in asset]
    return np.array([ip.rms_distance(a, b) for a, b in zip(thumbs[:-1], thumbs[1:])])


def count_shots(asset: VideoAsset, threshold: float = SHOT_THRESHOLD, deltas=None) -> int:
    deltas = _consecutive_distances(asset) if deltas is None else deltas
    return 1 + int(np.sum(deltas > threshold))


def stop_motion(asset: VideoAsset, epsilon: float = CHANGE_EPSILON, deltas=None) -> float:
    """N_f / (1 + number of adjacent frame pairs that differ by more than ``epsilon``)."""
    deltas = _consecutive_distances(asset) if deltas is None else deltas
    return asset.n_frames / (1.0 + float(np.sum(deltas > epsilon)))


def loop_distance(asset: VideoAsset) -> float:
    return ip.frame_distance(asset.frame(0), asset.frame(asset.n_frames - 1))


def saliency_maps(asset: VideoAsset) -> list[np.ndarray]:
    return [ip.spectral_residual_saliency(f) for f in asset]


def movement(asset: VideoAsset, maps=None) -> float:
    """Sum of Euclidean distances between consecutive saliency maps, divided by N_f."""
    maps = saliency_maps(asset) if maps is None else maps
    total = sum(float(np.linalg.norm(a - b)) for a, b in zip(maps[:-1], maps[1:]))
    return total / asset.n_frames


def frame_shake(frame) -> float:
    g = ip.resize_bilinear(ip.to_gray(frame), SHAKE_SIZE, SHAKE_SIZE)
    directionality = []
    for hist in ip.block_hough_angles(ip.thin_edge_map(g)):
        total = hist.sum()
        if total > 0:
            directionality.append(hist.max() / total)
    if not directionality:
        return 0.0
    return 1.0 - float(np.mean(directionality))


def camera_shake(asset: VideoAsset) -> float:
    """Mean over frames of (1 - mean block Hough directionality); blank frames count 0."""
    return float(np.mean([frame_shake(f) for f in asset]))


def filmmaking(asset: VideoAsset) -> np.ndarray:
    deltas = _consecutive_distances(asset)
    return np.array(
        [
            asset.n_frames,
            count_shots(asset, deltas=deltas),
            stop_motion(asset, deltas=deltas),
            loop_distance(asset),
            movement(asset),
            camera_shake(asset),
        ],
        dtype=np.float64,
    )


# -- composition ------------------------------------------------------------


def _central_third(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    return a[h // 3:(2 * h + 2) // 3, w // 3:(2 * w + 2) // 3]


def rule_of_thirds(frame) -> tuple[float, float, float]:
    hsv = ip.rgb_to_hsv(_central_third(ip.as_frame(frame)))
    return (
        ip.circular_mean_hue(hsv[..., 0]),
        float(hsv[..., 1].mean()),
        float(hsv[..., 2].mean()),
    )


def _center_energy_ratio(level: dict[str, np.ndarray]) -> float:
    energy = sum(c**2 for c in level.values())
    total = float(energy.sum())
    if total <= 0.0:
        return 0.0
    rows = np.array_split(np.arange(energy.shape[0]), 4)
    cols = np.array_split(np.arange(energy.shape[1]), 4)
    inner = energy[rows[1][0]:rows[2][-1] + 1, cols[1][0]:cols[2][-1] + 1]
    return float(inner.sum()) / total


def low_dof(frame) -> np.ndarray:
    """Share of Haar detail energy in the central 2x2 tiles of a 4x4 tiling,
    per HSV channel (outer) and level 1..3 (inner)."""
    hsv = ip.rgb_to_hsv(ip.as_frame(frame))
    out = []
    for c in range(3):
        pyr = ip.haar_pyramid(hsv[..., c], levels=3, min_size=32)
        out.extend(_center_energy_ratio(level) for level in pyr.levels)
    return np.array(out)


def michelson_contrast(frame) -> float:
    y = ip.to_gray(ip.as_frame(frame))
    lo, hi = np.percentile(y, [1.0, 99.0])
    return float((hi - lo) / (hi + lo + 1e-6))


def symmetry(frame) -> float:
    """L1 distance between edge histograms of the left half and the mirrored right half."""
    g = ip.to_gray(ip.as_frame(frame))
    half = g.shape[1] // 2
    left = g[:, :half]
    right = g[:, g.shape[1] - half:][:, ::-1]
    return float(np.abs(ip.edge_histogram(left) - ip.edge_histogram(right)).sum())


def uniqueness(frame, corpus_mean_spectrum) -> float:
    if corpus_mean_spectrum is None:
        raise ValueError("uniqueness needs the corpus mean spectrum (fit or load a novelty model first)")
    spec = ip.log_amplitude_spectrum(ip.to_gray(ip.as_frame(frame)))
    return float(np.linalg.norm(spec - np.asarray(corpus_mean_spectrum)))


def _luma_bytes(y: np.ndarray) -> np.ndarray:
    return np.round(np.clip(y, 0.0, 1.0) * 255.0).astype(np.uint8)


def image_order(frame) -> tuple[float, float]:
    """(1 - luminance entropy / 8 bits, 1 - deflate ratio of the 64x64 luminance buffer)."""
    y = ip.to_gray(ip.as_frame(frame))
    hist = np.bincount(_luma_bytes(y).ravel(), minlength=256).astype(np.float64)
    p = hist[hist > 0] / hist.sum()
    entropy = float(-np.sum(p * np.log2(p)))
    raw = _luma_bytes(ip.resize_bilinear(y, ip.ANALYSIS_SIZE, ip.ANALYSIS_SIZE)).tobytes()
    comp = zlib.compressobj(9, zlib.DEFLATED, -15)
    size = len(comp.compress(raw) + comp.flush())
    return max(0.0, 1.0 - entropy / 8.0), float(np.clip(1.0 - size / len(raw), 0.0, 1.0))


def composition(frame, corpus_mean_spectrum) -> np.ndarray:
    frame = ip.as_frame(frame)
    return np.concatenate(
        [
            rule_of_thirds(frame),
            low_dof(frame),
            [michelson_contrast(frame), symmetry(frame), uniqueness(frame, corpus_mean_spectrum)],
            image_order(frame),
        ]
    )


@dataclass(frozen=True)
class FilmmakingVec:
    n_frames: int
    n_shots: int
    stop_motion: float
    loop: float
    movement: float
    camera_shake: float

    @classmethod
    def from_array(cls, v) -> "FilmmakingVec":
        return cls(int(v[0]), int(v[1]), *map(float, v[2:6]))
