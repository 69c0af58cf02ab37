"""Six-dimensional audio affect vector: loudness (2), mode, roughness, rhythm (2)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import AudioClip

FRAME_SIZE = 4096
HOP_SIZE = 2048
# onset detection needs finer time resolution than chroma and peak pairing
ONSET_FRAME = 2048
ONSET_HOP = 512
ONSET_COMPRESSION = 100.0

MAJOR_PROFILE = np.array([6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88])
MINOR_PROFILE = np.array([6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17])

CHROMA_FMIN = 65.406  # C2
CHROMA_FMAX = 4186.0  # C8

NAMES = ("total_energy", "short_time_energy", "mode", "roughness", "onset_rate", "zcr")


@dataclass(frozen=True)
class OnsetConfig:
    """Peak picking on spectral flux.

    A frame is an onset when its flux is a local maximum, exceeds
    ``mean + k * std`` over a ``+-window`` second neighbourhood, and exceeds
    ``floor`` times the mean per-frame spectral magnitude sum.
    """

    k: float = 1.5
    window: float = 0.5
    floor: float = 0.1


def _samples(clip: AudioClip) -> np.ndarray:
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty audio clip")
    return x


def total_energy(clip: AudioClip) -> float:
    x = _samples(clip)
    return float(np.mean(x * x))


def window_starts(n: int, win: int, hop: int) -> list[int]:
    """Window starts every ``hop`` samples until a window reaches the end of the signal."""
    starts = [0]
    while starts[-1] + win < n:
        starts.append(starts[-1] + hop)
    return starts


def short_time_energy(clip: AudioClip, window: float = 2.0, hop: float = 1.0) -> float:
    """Mean of per-window mean-square over 2 s windows with a 1 s hop."""
    x = _samples(clip)
    win = max(1, int(round(window * clip.sample_rate)))
    step = max(1, int(round(hop * clip.sample_rate)))
    energies = [np.mean(x[s:s + win] ** 2) for s in window_starts(len(x), win, step)]
    return float(np.mean(energies))


def stft_magnitude(clip: AudioClip, frame: int = FRAME_SIZE, hop: int = HOP_SIZE) -> np.ndarray:
    """Hann-windowed magnitude spectra, shape (n_frames, frame // 2 + 1)."""
    x = _samples(clip)
    if len(x) < frame:
        raise ValueError(f"clip shorter than one analysis frame ({len(x)} < {frame} samples)")
    n = 1 + (len(x) - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return np.abs(np.fft.rfft(x[idx] * np.hanning(frame), axis=1))


def chromagram(clip: AudioClip) -> np.ndarray:
    """Time-averaged 12-bin chroma (C = 0, A4 = 440 Hz)."""
    mag = stft_magnitude(clip)
    freqs = np.fft.rfftfreq(FRAME_SIZE, 1.0 / clip.sample_rate)
    band = (freqs >= CHROMA_FMIN) & (freqs <= CHROMA_FMAX)
    pitch_class = (np.round(12.0 * np.log2(freqs[band] / 440.0)).astype(int) + 9) % 12
    chroma = np.zeros((mag.shape[0], 12))
    for pc in range(12):
        chroma[:, pc] = mag[:, band][:, pitch_class == pc].sum(axis=1)
    return chroma.mean(axis=0)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    return float(np.sum(a * b) / den) if den > 0 else 0.0


def key_strengths(chroma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Correlation of the chroma with each of the 12 major and 12 minor key profiles."""
    major = np.array([_pearson(np.roll(chroma, -k), MAJOR_PROFILE) for k in range(12)])
    minor = np.array([_pearson(np.roll(chroma, -k), MINOR_PROFILE) for k in range(12)])
    return major, minor


def mode_estimate(clip: AudioClip) -> float:
    """Strongest major-key strength minus strongest minor-key strength.

    Positive for major-sounding audio, negative for minor; 0 for silence.
    """
    chroma = chromagram(clip)
    if np.ptp(chroma) <= 0:
        return 0.0
    major, minor = key_strengths(chroma)
    return float(major.max() - minor.max())


def _spectral_peaks(mag: np.ndarray, rel: float = 0.01, reach: int = 3) -> np.ndarray:
    """Bins that are the maximum within +-``reach`` bins and at least ``rel`` of the frame max."""
    top = mag.max()
    if top <= 0:
        return np.array([], dtype=int)
    padded = np.pad(mag, reach, mode="constant", constant_values=-np.inf)
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * reach + 1)
    is_max = mag >= windows.max(axis=1)
    is_max[0] = False
    return np.nonzero(is_max & (mag >= rel * top))[0]


def plomp_levelt(f1, f2, a1, a2):
    """Sethares' parameterization of the Plomp-Levelt dissonance curve."""
    fmin = np.minimum(f1, f2)
    df = np.abs(f2 - f1)
    s = 0.24 / (0.021 * fmin + 19.0)
    return a1 * a2 * (np.exp(-3.5 * s * df) - np.exp(-5.75 * s * df))


def roughness(clip: AudioClip) -> float:
    """Mean over frames of the summed pairwise dissonance of spectral peaks.

    Peak magnitudes are scaled so a full-scale sinusoid has amplitude 1.
    """
    mag = stft_magnitude(clip) * (2.0 / np.hanning(FRAME_SIZE).sum())
    freqs = np.fft.rfftfreq(FRAME_SIZE, 1.0 / clip.sample_rate)
    values = []
    for spectrum in mag:
        peaks = _spectral_peaks(spectrum)
        if peaks.size < 2:
            values.append(0.0)
            continue
        i, j = np.triu_indices(peaks.size, k=1)
        f, a = freqs[peaks], spectrum[peaks]
        values.append(float(np.sum(plomp_levelt(f[i], f[j], a[i], a[j]))))
    return float(np.mean(values))


def spectral_flux(mag: np.ndarray) -> np.ndarray:
    """Half-wave rectified frame-to-frame increase of ``mag``, summed over bins; the first frame is 0."""
    flux = np.zeros(mag.shape[0])
    flux[1:] = np.maximum(np.diff(mag, axis=0), 0.0).sum(axis=1)
    return flux


def onset_rate(clip: AudioClip, cfg: OnsetConfig = OnsetConfig()) -> float:
    """Detected onsets per second.

    Flux is taken on log-compressed magnitudes, ``log(1 + 100 |X|)``, so onset
    strength depends little on where an onset falls relative to the frame grid.
    """
    mag = np.log1p(ONSET_COMPRESSION * stft_magnitude(clip, ONSET_FRAME, ONSET_HOP))
    flux = spectral_flux(mag)
    floor = cfg.floor * mag.sum(axis=1).mean()
    if floor <= 0:
        return 0.0
    reach = max(1, int(round(cfg.window * clip.sample_rate / ONSET_HOP)))
    count = 0
    for t in range(1, len(flux)):
        lo, hi = max(0, t - reach), min(len(flux), t + reach + 1)
        hood = flux[lo:hi]
        left = flux[t - 1]
        right = flux[t + 1] if t + 1 < len(flux) else -np.inf
        if (
            flux[t] > left
            and flux[t] >= right
            and flux[t] > hood.mean() + cfg.k * hood.std()
            and flux[t] > floor
        ):
            count += 1
    return count / clip.duration


def zero_crossing_rate(clip: AudioClip) -> float:
    x = _samples(clip)
    return float(np.sum(x[:-1] * x[1:] < 0) / clip.duration)


def audio_affect(clip: AudioClip) -> np.ndarray:
    return np.array(
        [
            total_energy(clip),
            short_time_energy(clip),
            mode_estimate(clip),
            roughness(clip),
            onset_rate(clip),
            zero_crossing_rate(clip),
        ]
    )
