"""Deterministic image-processing primitives shared by the visual extractors.

Frames are ``float64`` arrays of shape ``(H, W, 3)`` with values in [0, 1];
gray images are ``(H, W)`` arrays in [0, 1].  Every function here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

ANALYSIS_SIZE = 64
GLCM_LEVELS = 32
HOUGH_BINS = 36
EDGE_FRACTION = 0.2
EHD_THRESHOLD = 11.0 / 255.0

# permille weights keep white at exactly 1.0
_LUMA = (299.0, 587.0, 114.0)


def as_frame(frame) -> np.ndarray:
    """Validate a frame and return it as float64 RGB in [0, 1].

    ``uint8`` input is rescaled by 1/255.  Gray ``(H, W)`` input is accepted
    and replicated over three channels.
    """
    arr = np.asarray(frame)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    else:
        arr = arr.astype(np.float64, copy=False)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) frame, got shape {arr.shape}")
    if arr.shape[0] < 8 or arr.shape[1] < 8:
        raise ValueError(f"frame must be at least 8x8, got {arr.shape[1]}x{arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frame contains non-finite values")
    return np.clip(arr, 0.0, 1.0)


def to_gray(frame) -> np.ndarray:
    """Luminance Y = 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1]."""
    arr = np.asarray(frame)
    arr = arr / 255.0 if arr.dtype == np.uint8 else arr.astype(np.float64, copy=False)
    if arr.ndim == 2:
        return np.clip(arr, 0.0, 1.0)
    y = (arr[..., 0] * _LUMA[0] + arr[..., 1] * _LUMA[1] + arr[..., 2] * _LUMA[2]) / 1000.0
    return np.clip(y, 0.0, 1.0)


def _axis_coords(n_in: int, n_out: int):
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    lo = np.clip(np.floor(pos).astype(np.intp), 0, n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img, width: int, height: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling.

    Works on gray ``(H, W)`` and multi-channel ``(H, W, C)`` arrays.  A
    1-pixel output axis samples the centre of the input axis.
    """
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    a = np.asarray(img, dtype=np.float64)
    h_in, w_in = a.shape[:2]
    if (h_in, w_in) == (height, width):
        return a.copy()
    r0, r1, rf = _axis_coords(h_in, height)
    c0, c1, cf = _axis_coords(w_in, width)
    extra = (None,) * (a.ndim - 2)
    rf = rf[(slice(None), None) + extra]
    cf = cf[(None, slice(None)) + extra]
    top = a[r0][:, c0] * (1.0 - cf) + a[r0][:, c1] * cf
    bottom = a[r1][:, c0] * (1.0 - cf) + a[r1][:, c1] * cf
    return top * (1.0 - rf) + bottom * rf


def thumbnail(frame, size: int = ANALYSIS_SIZE) -> np.ndarray:
    """Gray ``size`` x ``size`` analysis image of a frame."""
    return resize_bilinear(to_gray(frame), size, size)


def rms_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def frame_distance(a, b) -> float:
    """RMS luminance distance between two frames on the 64x64 analysis grid.

    The result lies in [0, 1]: 0 for identical frames, 1 for black vs white.
    """
    return rms_distance(thumbnail(a), thumbnail(b))


# -- spectral residual saliency -------------------------------------------

_GAUSS3 = np.exp(-(np.add.outer(np.arange(-1, 2) ** 2, np.arange(-1, 2) ** 2)) / 2.0)
_GAUSS3 /= _GAUSS3.sum()


def spectral_residual(grid: np.ndarray) -> np.ndarray:
    """Spectral-residual saliency of an arbitrary real 2-D signal.

    Returns a non-negative map of the same shape with unit sum.  Constant
    (or all-zero) input has no residual and yields the uniform map.
    """
    g = np.asarray(grid, dtype=np.float64)
    uniform = np.full(g.shape, 1.0 / g.size)
    if np.ptp(g) <= 1e-12:
        return uniform
    spec = np.fft.fft2(g)
    amplitude = np.abs(spec)
    phase = np.angle(spec)
    # unit floor: exact spectral zeros of synthetic images would otherwise dominate the residual
    log_amp = np.log1p(amplitude)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="wrap")
    recon = np.fft.ifft2(np.exp(residual + 1j * phase))
    sal = ndimage.convolve(np.abs(recon) ** 2, _GAUSS3, mode="nearest")
    sal = np.maximum(sal, 0.0)
    total = sal.sum()
    if not np.isfinite(total) or total <= 0.0:
        return uniform
    return sal / total


def spectral_residual_saliency(frame) -> np.ndarray:
    """64x64 unit-sum saliency map of a frame (or gray image)."""
    return spectral_residual(thumbnail(frame))


# -- gray-level co-occurrence ---------------------------------------------


def quantize(img: np.ndarray, levels: int = GLCM_LEVELS) -> np.ndarray:
    g = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.minimum((g * levels).astype(np.intp), levels - 1)


def glcm(img, offset: tuple[int, int] = (1, 0), levels: int = GLCM_LEVELS) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix for pixel offset ``(dx, dy)``."""
    q = quantize(img, levels)
    dx, dy = offset
    h, w = q.shape
    y0, y1 = max(0, -dy), h - max(0, dy)
    x0, x1 = max(0, -dx), w - max(0, dx)
    src = q[y0:y1, x0:x1]
    dst = q[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
    counts = np.bincount((src * levels + dst).ravel(), minlength=levels * levels)
    counts = counts.reshape(levels, levels).astype(np.float64)
    counts = counts + counts.T
    total = counts.sum()
    return counts / total if total > 0 else counts


def haralick(P: np.ndarray) -> dict[str, float]:
    """Contrast, dissimilarity, energy (angular second moment), homogeneity, entropy (bits)."""
    n = P.shape[0]
    i, j = np.indices((n, n))
    diff = (i - j).astype(np.float64)
    nz = P[P > 0]
    return {
        "contrast": float(np.sum(P * diff**2)),
        "dissimilarity": float(np.sum(P * np.abs(diff))),
        "energy": float(np.sum(P**2)),
        "homogeneity": float(np.sum(P / (1.0 + diff**2))),
        "entropy": float(-np.sum(nz * np.log2(nz))),
    }


GLCM_STATS = ("contrast", "dissimilarity", "energy", "homogeneity", "entropy")


# -- edge histogram ---------------------------------------------------------

_SQ2 = np.sqrt(2.0)
# vertical, horizontal, 45 deg, 135 deg, non-directional
_EHD_FILTERS = np.array(
    [
        [[1.0, -1.0], [1.0, -1.0]],
        [[1.0, 1.0], [-1.0, -1.0]],
        [[_SQ2, 0.0], [0.0, -_SQ2]],
        [[0.0, _SQ2], [-_SQ2, 0.0]],
        [[2.0, -2.0], [-2.0, 2.0]],
    ]
)


def _sub_block_side(h: int, w: int) -> int:
    return max(1, int(np.sqrt(h * w / 1100.0) / 2.0))


def edge_histogram(img, grid: int = 4, side: int | None = None) -> np.ndarray:
    """Local edge histogram: 5 orientation bins for each of ``grid`` x ``grid`` cells.

    Each cell is reduced to a grid of sub-block means; every 2x2 window of
    sub-blocks is scored by the five oriented filters and the strongest
    response above threshold votes for its bin.  Bins are normalized by the
    number of windows in the cell.  Output is cell-major, length ``5 * grid**2``.
    """
    g = np.asarray(img, dtype=np.float64)
    h, w = g.shape
    s = side if side is not None else _sub_block_side(h, w)
    out = np.zeros((grid * grid, 5))
    rows = np.array_split(np.arange(h), grid)
    cols = np.array_split(np.arange(w), grid)
    for ci, rr in enumerate(rows):
        for cj, cc in enumerate(cols):
            cell = g[rr[0]:rr[-1] + 1, cc[0]:cc[-1] + 1] if len(rr) and len(cc) else g[:0, :0]
            m, n = cell.shape[0] // s, cell.shape[1] // s
            if m < 2 or n < 2:
                continue
            sub = cell[: m * s, : n * s].reshape(m, s, n, s).mean(axis=(1, 3))
            win = np.stack([sub[:-1, :-1], sub[:-1, 1:], sub[1:, :-1], sub[1:, 1:]], axis=-1)
            resp = np.abs(win @ _EHD_FILTERS.reshape(5, 4).T)
            best = resp.argmax(axis=-1)
            strong = resp.max(axis=-1) >= EHD_THRESHOLD
            counts = np.bincount(best[strong], minlength=5)
            out[ci * grid + cj] = counts / best.size
    return out.ravel()


# -- Sobel edges and Hough orientation --------------------------------------


def sobel_magnitude(img) -> np.ndarray:
    g = np.asarray(img, dtype=np.float64)
    return np.hypot(ndimage.sobel(g, axis=1, mode="reflect"), ndimage.sobel(g, axis=0, mode="reflect"))


def edge_map(img, fraction: float = EDGE_FRACTION) -> np.ndarray:
    """Pixels whose Sobel magnitude exceeds ``fraction`` of the image maximum."""
    mag = sobel_magnitude(img)
    peak = mag.max()
    if peak <= 0.0:
        return np.zeros(mag.shape, dtype=bool)
    return mag > fraction * peak


def thin_edge_map(img, fraction: float = EDGE_FRACTION) -> np.ndarray:
    """:func:`edge_map` reduced to one-pixel ridges by non-maximum suppression.

    A pixel survives when its magnitude is not exceeded by the neighbour on
    one side of the gradient direction and strictly exceeds the other, so a
    two-pixel plateau keeps exactly one column.
    """
    g = np.asarray(img, dtype=np.float64)
    gx = ndimage.sobel(g, axis=1, mode="reflect")
    gy = ndimage.sobel(g, axis=0, mode="reflect")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0.0:
        return np.zeros(mag.shape, dtype=bool)
    sector = np.mod(np.rint(np.rad2deg(np.arctan2(gy, gx)) / 45.0), 4).astype(np.intp)
    padded = np.pad(mag, 1)
    h, w = mag.shape
    keep = np.zeros(mag.shape, dtype=bool)
    for k, (dy, dx) in enumerate(((0, 1), (1, 1), (1, 0), (1, -1))):
        ahead = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        behind = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        keep |= (sector == k) & (mag >= behind) & (mag > ahead)
    return keep & (mag > fraction * peak)


def _trig_table():
    theta = np.deg2rad(np.arange(HOUGH_BINS // 2) * (180.0 / HOUGH_BINS))
    c, s = np.cos(theta), np.sin(theta)
    # second half built from the first so that a 90-degree rotation maps bins exactly
    return np.concatenate([c, -s]), np.concatenate([s, c])


_COS, _SIN = _trig_table()


def _rho_index(ys: np.ndarray, xs: np.ndarray, h: int, w: int):
    x = xs - (w - 1) / 2.0
    y = ys - (h - 1) / 2.0
    radius = int(np.ceil(np.hypot(h, w) / 2.0)) + 1
    r = np.outer(x, _COS) + np.outer(y, _SIN)
    # half away from zero keeps rho(-p) == -rho(p); np.rint would merge +-0.5
    rho = (np.sign(r) * np.floor(np.abs(r) + 0.5)).astype(np.intp) + radius
    return rho, radius


def _accumulate(ys, xs, h, w) -> np.ndarray:
    rho, radius = _rho_index(ys, xs, h, w)
    n_rho = 2 * radius + 1
    flat = rho + np.arange(HOUGH_BINS) * n_rho
    acc = np.bincount(flat.ravel(), minlength=n_rho * HOUGH_BINS)
    return acc.reshape(HOUGH_BINS, n_rho).T.astype(np.float64)


@lru_cache(maxsize=64)
def _capacity(h: int, w: int) -> np.ndarray:
    ys, xs = np.indices((h, w))
    return _accumulate(ys.ravel(), xs.ravel(), h, w)


def _hough_histogram(edges: np.ndarray) -> np.ndarray:
    h, w = edges.shape
    hist = np.zeros(HOUGH_BINS)
    ys, xs = np.nonzero(edges)
    if ys.size == 0:
        return hist
    acc = _accumulate(ys, xs, h, w)
    cap = _capacity(h, w)
    min_len = 0.5 * min(h, w)
    score = np.where(cap >= min_len, acc / np.maximum(cap, 1.0), 0.0)
    # theta wraps onto itself with rho negated
    pad = 2
    ext = np.concatenate([score[::-1, -pad:], score, score[::-1, :pad]], axis=1)
    local = ndimage.maximum_filter(ext, size=(5, 2 * pad + 1), mode="constant", cval=0.0)
    local = local[:, pad:-pad]
    peaks = (score >= 0.5) & (score == local)
    return np.bincount(np.nonzero(peaks)[1], weights=acc[peaks], minlength=HOUGH_BINS)


def hough_angles(img, block: tuple[slice, slice] | None = None) -> np.ndarray:
    """36-bin histogram (5 degree bins over [0, 180)) of Hough line evidence.

    Edges come from :func:`thin_edge_map` on the whole image; only edge pixels
    inside ``block`` (a ``(row_slice, col_slice)`` pair) vote.  A line counts
    when its accumulator cell is a local maximum covering at least half of
    the chord through the block; it adds its vote count to its angle bin.
    """
    edges = thin_edge_map(img)
    if block is not None:
        edges = edges[block]
    return _hough_histogram(edges)


def block_hough_angles(edges: np.ndarray, grid: int = 4) -> list[np.ndarray]:
    """Per-block histograms of a precomputed edge map over a ``grid`` x ``grid`` tiling."""
    h, w = edges.shape
    out = []
    for rr in np.array_split(np.arange(h), grid):
        for cc in np.array_split(np.arange(w), grid):
            out.append(_hough_histogram(edges[rr[0]:rr[-1] + 1, cc[0]:cc[-1] + 1]))
    return out


# -- spectra and wavelets ---------------------------------------------------


def log_amplitude_spectrum(img) -> np.ndarray:
    """DC-centred ``log(1 + |FFT|)`` of the 64x64 analysis image."""
    g = np.asarray(img, dtype=np.float64)
    if g.ndim == 3:
        g = to_gray(g)
    if g.shape != (ANALYSIS_SIZE, ANALYSIS_SIZE):
        g = resize_bilinear(g, ANALYSIS_SIZE, ANALYSIS_SIZE)
    return np.log1p(np.abs(np.fft.fftshift(np.fft.fft2(g))))


@dataclass(frozen=True)
class HaarPyramid:
    """Orthonormal Haar analysis; ``levels[0]`` is the finest level."""

    levels: tuple[dict[str, np.ndarray], ...]
    approximation: np.ndarray
    padded: np.ndarray


def _pad_pow2(a: np.ndarray, minimum: int) -> np.ndarray:
    pads = []
    for n in a.shape:
        target = max(minimum, 1 << int(np.ceil(np.log2(max(n, 1)))))
        extra = target - n
        pads.append((extra // 2, extra - extra // 2))
    return np.pad(a, pads, mode="edge")


def haar_pyramid(channel, levels: int = 3, min_size: int = 1) -> HaarPyramid:
    """Haar detail coefficients (LH, HL, HH) per level.

    The channel is padded to a power-of-two size by edge replication, split
    evenly between both sides so the image centre stays centred.
    """
    a = _pad_pow2(np.asarray(channel, dtype=np.float64), max(min_size, 1 << levels))
    padded = a
    out = []
    for _ in range(levels):
        tl, tr = a[0::2, 0::2], a[0::2, 1::2]
        bl, br = a[1::2, 0::2], a[1::2, 1::2]
        out.append(
            {
                "LH": (tl + tr - bl - br) / 2.0,
                "HL": (tl - tr + bl - br) / 2.0,
                "HH": (tl - tr - bl + br) / 2.0,
            }
        )
        a = (tl + tr + bl + br) / 2.0
    return HaarPyramid(tuple(out), a, padded)


# -- colour ------------------------------------------------------------------


def rgb_to_hsv(frame) -> np.ndarray:
    """HSV with all channels in [0, 1]; achromatic pixels get hue 0."""
    rgb = np.asarray(frame, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    delta = v - rgb.min(axis=-1)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r,
        ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h / 6.0, 0.0)
    return np.stack([h % 1.0, s, v], axis=-1)


def circular_mean_hue(hue: np.ndarray) -> float:
    """Mean of hues in [0, 1) treated as angles; result in [0, 1)."""
    ang = 2.0 * np.pi * np.asarray(hue, dtype=np.float64)
    c, s = np.mean(np.cos(ang)), np.mean(np.sin(ang))
    if abs(c) < 1e-12 and abs(s) < 1e-12:
        return 0.0
    mean = np.arctan2(s, c) / (2.0 * np.pi)
    mean = mean % 1.0
    # values within rounding of a full turn are reported as 0
    return 0.0 if mean > 1.0 - 1e-12 else float(mean)
