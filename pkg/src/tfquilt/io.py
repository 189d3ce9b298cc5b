"""File ingestion and export helpers: WAV, raw float64, and PGM images."""

from __future__ import annotations

import sys

import numpy as np
from scipy.io import wavfile

from .signals import DiscreteSignal

__all__ = ["read_wav", "write_wav", "write_raw_float64", "read_raw_float64", "write_pgm", "log_energy_image"]

_PCM_SCALE = {np.dtype("int16"): 2**15, np.dtype("int32"): 2**31, np.dtype("uint8"): 2**7}


def read_wav(path) -> DiscreteSignal:
    """Read PCM 16/24/32 or float32/64 WAV; multichannel keeps channel 0."""
    fs, data = wavfile.read(path)
    if data.ndim == 2:
        print(f"warning: {data.shape[1]} channels in {path}; keeping channel 0", file=sys.stderr)
        data = data[:, 0]
    if data.dtype in _PCM_SCALE:
        if data.dtype == np.dtype("uint8"):
            samples = (data.astype(np.float64) - 128.0) / 128.0
        else:
            samples = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    else:
        samples = data.astype(np.float64)
    return DiscreteSignal(samples, float(fs))


def write_wav(path, signal: DiscreteSignal) -> None:
    """Write float32 WAV; complex signals are written as their real part."""
    samples = signal.samples
    if samples.dtype.kind == "c":
        samples = samples.real
    wavfile.write(path, int(round(signal.fs)), samples.astype(np.float32))


def write_raw_float64(path, signal: DiscreteSignal) -> None:
    samples = signal.samples
    if samples.dtype.kind == "c":
        samples = samples.real
    samples.astype("<f8").tofile(path)


def read_raw_float64(path, fs: float) -> DiscreteSignal:
    return DiscreteSignal(np.fromfile(path, dtype="<f8"), fs)


def log_energy_image(values: np.ndarray, max_bin: int | None = None) -> np.ndarray:
    """8-bit image of ``log2(1 + |V|^2)``, frequency up, time rightward."""
    v = values[:, :max_bin] if max_bin else values
    img = np.log2(1.0 + np.abs(v) ** 2)
    lo, hi = float(img.min()), float(img.max())
    if hi <= lo:
        scaled = np.zeros_like(img)
    else:
        scaled = (img - lo) / (hi - lo)
    return np.flipud((scaled.T * 255.0).astype(np.uint8))


def index_image(indices: np.ndarray, n_levels: int, max_bin: int | None = None) -> np.ndarray:
    """8-bit image of small integer labels (window indices), frequency up."""
    v = indices[:, :max_bin] if max_bin else indices
    step = 255 // max(1, n_levels - 1) if n_levels > 1 else 0
    return np.flipud((v.T * step).astype(np.uint8))


def write_pgm(path, image: np.ndarray) -> None:
    """Binary 8-bit PGM (P5)."""
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("PGM export needs a 2-D uint8 image")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
