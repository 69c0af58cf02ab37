"""Frame-level visual emotional-affect features."""

from __future__ import annotations

import numpy as np

from . import imgproc as ip

COLOR_NAMES = ("black", "white", "gray", "red", "orange", "yellow", "green", "blue", "purple")
# hue upper bounds in degrees for red-wrap .. purple; red also covers [345, 360)
_HUE_EDGES = np.array([15.0, 45.0, 70.0, 160.0, 250.0, 345.0])

# Valdez & Mehrabian coefficients on mean brightness V and saturation S
PAD_COEFFS = {
    "pleasure": (0.69, 0.22),
    "arousal": (-0.31, 0.60),
    "dominance": (-0.76, 0.32),
}

GLCM_OFFSETS = ((1, 0), (0, 1))

TABLE_NAMES = (
    *(f"color_{n}" for n in COLOR_NAMES),
    *(f"glcm_{stat}_{dx}{dy}" for dx, dy in GLCM_OFFSETS for stat in ip.GLCM_STATS),
    "hue", "saturation", "brightness",
    "pleasure", "arousal", "dominance",
)
EXTENDED_NAMES = (*TABLE_NAMES, "skin", "level_of_detail")


def color_names(frame) -> np.ndarray:
    """Fraction of pixels in each of the 9 colour names (order: ``COLOR_NAMES``)."""
    hsv = ip.rgb_to_hsv(ip.as_frame(frame)).reshape(-1, 3)
    h, s, v = hsv[:, 0] * 360.0, hsv[:, 1], hsv[:, 2]
    hue_class = 3 + np.searchsorted(_HUE_EDGES, h, side="right")
    hue_class = np.where(hue_class == 9, 3, hue_class)
    label = np.where(v < 0.15, 0, np.where((s < 0.15) & (v > 0.85), 1, np.where(s < 0.15, 2, hue_class)))
    return np.bincount(label, minlength=9) / label.size


def glcm_props(frame) -> np.ndarray:
    g = ip.to_gray(ip.as_frame(frame))
    out = []
    for off in GLCM_OFFSETS:
        stats = ip.haralick(ip.glcm(g, off))
        out.extend(stats[k] for k in ip.GLCM_STATS)
    return np.array(out)


def hsv_stats(frame) -> tuple[float, float, float]:
    hsv = ip.rgb_to_hsv(ip.as_frame(frame))
    return ip.circular_mean_hue(hsv[..., 0]), float(hsv[..., 1].mean()), float(hsv[..., 2].mean())


def pad_from_means(brightness: float, saturation: float) -> tuple[float, float, float]:
    return tuple(cv * brightness + cs * saturation for cv, cs in PAD_COEFFS.values())


def pad(frame) -> tuple[float, float, float]:
    """(pleasure, arousal, dominance) from mean brightness and saturation."""
    _, s, v = hsv_stats(frame)
    return pad_from_means(v, s)


def skin_ratio(frame) -> float:
    rgb = ip.as_frame(frame)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    spread = rgb.max(axis=-1) - rgb.min(axis=-1)
    mask = (r > 0.37) & (g > 0.16) & (b > 0.08) & (r - b > 0.06) & (r - g > 0.06) & (spread > 0.06)
    return float(mask.mean())


def level_of_detail(frame) -> float:
    """Fraction of pixels whose Sobel magnitude exceeds 0.2 of the frame maximum."""
    return float(ip.edge_map(ip.to_gray(ip.as_frame(frame))).mean())


def visual_affect(frame, extended: bool = False) -> np.ndarray:
    frame = ip.as_frame(frame)
    hue, sat, val = hsv_stats(frame)
    parts = [color_names(frame), glcm_props(frame), [hue, sat, val], pad_from_means(val, sat)]
    if extended:
        parts.append([skin_ratio(frame), level_of_detail(frame)])
    return np.concatenate(parts)
