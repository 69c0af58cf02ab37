"""Shared fixtures builders for the test-suite."""

import numpy as np

from microvid.ingest import AudioClip, VideoAsset

SR = 22050


def to_uint8(frames) -> np.ndarray:
    return np.round(np.clip(np.asarray(frames, dtype=np.float64), 0, 1) * 255).astype(np.uint8)


def make_asset(frames, audio=None, video_id="v") -> VideoAsset:
    """Asset from float frames in [0, 1] (gray (N,H,W) or RGB (N,H,W,3))."""
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim == 3:
        arr = np.repeat(arr[..., None], 3, axis=-1)
    clip = AudioClip(np.zeros(SR) if audio is None else np.asarray(audio, dtype=np.float64), SR)
    return VideoAsset(video_id, to_uint8(arr), clip)


def tone(freqs, seconds=6.0, amp=None, sr=SR):
    t = np.arange(int(seconds * sr)) / sr
    freqs = np.atleast_1d(freqs)
    amp = 1.0 / len(freqs) if amp is None else amp
    return amp * sum(np.sin(2 * np.pi * f * t) for f in freqs)


def clip(samples, sr=SR) -> AudioClip:
    return AudioClip(np.asarray(samples, dtype=np.float64), sr)
