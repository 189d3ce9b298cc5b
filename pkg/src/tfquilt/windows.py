"""Analysis windows: construction, chirping, and adaptivity diagnostics.

A window is a finite tap sequence zero-padded to its FFT size.  Chirped
variants multiply the taps by a unit-modulus quadratic phase about the
window centre, which concentrates linear chirps of matching slope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WindowSpec",
    "QuiltedFamily",
    "DecayReport",
    "make_window",
    "chirp_window",
    "decay_report",
    "cola_check",
    "window_to_json",
    "window_from_json",
]


@dataclass(frozen=True)
class WindowSpec:
    """Window taps stored at full FFT length (zero beyond ``native_length``)."""

    taps: np.ndarray
    native_length: int
    fft_size: int
    chirp_rate: float = 0.0
    label: str = ""

    def __post_init__(self):
        taps = np.asarray(self.taps)
        if self.native_length < 1:
            raise ValueError("native_length must be >= 1")
        if self.fft_size < self.native_length:
            raise ValueError("fft_size must be >= native_length")
        if taps.shape != (self.fft_size,):
            raise ValueError("taps must have length fft_size")
        if np.any(taps[self.native_length:] != 0):
            raise ValueError("taps beyond native_length must be exactly zero")
        if not np.any(taps):
            raise ValueError("window must have at least one nonzero tap")
        object.__setattr__(self, "taps", taps)

    @property
    def center_index(self) -> float:
        """Chirping/symmetry centre of the native taps."""
        return (self.native_length - 1) / 2.0

    @property
    def is_complex(self) -> bool:
        return self.taps.dtype.kind == "c"

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.taps)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.taps) ** 2)))


@dataclass(frozen=True)
class QuiltedFamily:
    """Window collection sharing one hop size."""

    windows: tuple
    hop: int

    def __post_init__(self):
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if len(self.windows) < 1:
            raise ValueError("family needs at least one window")
        object.__setattr__(self, "windows", tuple(self.windows))

    @property
    def n_windows(self) -> int:
        return len(self.windows)

    @property
    def max_fft_size(self) -> int:
        return max(w.fft_size for w in self.windows)

    @property
    def min_fft_size(self) -> int:
        """Coarsest frequency grid size across the family."""
        return min(w.fft_size for w in self.windows)


@dataclass(frozen=True)
class DecayReport:
    """Supremum of the window spectrum outside a frequency band."""

    band_halfwidth_hz: float
    sup_out: float
    grid_resolution_hz: float


def _cosine_taps(kind: str, m: int) -> np.ndarray:
    if m == 1:
        return np.ones(1)
    n = np.arange(m)
    x = 2.0 * np.pi * n / (m - 1)  # symmetric form
    if kind == "hann":
        return 0.5 * (1.0 - np.cos(x))
    if kind == "blackman":
        return 0.42 - 0.5 * np.cos(x) + 0.08 * np.cos(2.0 * x)
    raise ValueError(f"unknown window kind {kind!r}")


def make_window(
    kind: str,
    native_length: int,
    fft_size: int | None = None,
    normalize_l1: bool = True,
    taps: np.ndarray | None = None,
    label: str | None = None,
) -> WindowSpec:
    """Build a symmetric cosine-sum (or rectangular/custom) window.

    The taps are optionally divided by their l1 norm and zero-padded to
    ``fft_size``.  ``custom`` requires explicit ``taps``.
    """
    if native_length < 1:
        raise ValueError("native_length must be >= 1")
    if fft_size is None:
        fft_size = native_length
    if kind == "rect":
        base = np.ones(native_length)
    elif kind in ("hann", "blackman"):
        base = _cosine_taps(kind, native_length)
    elif kind == "custom":
        if taps is None or len(taps) == 0:
            raise ValueError("custom window requires nonempty taps")
        base = np.asarray(taps)
        if base.shape != (native_length,):
            raise ValueError("custom taps must have length native_length")
    else:
        raise ValueError(f"unknown window kind {kind!r}")

    if normalize_l1:
        norm = np.sum(np.abs(base))
        if norm == 0:
            raise ValueError("window taps are all zero")
        base = base / norm

    padded = np.zeros(fft_size, dtype=base.dtype)
    padded[:native_length] = base
    return WindowSpec(
        taps=padded,
        native_length=native_length,
        fft_size=fft_size,
        chirp_rate=0.0,
        label=label if label is not None else f"{kind}{native_length}",
    )


def chirp_window(base: WindowSpec, sigma: float, fs: float) -> WindowSpec:
    """Multiply taps by ``exp(2*pi*i*sigma*(t - t_center)^2 / 2)``.

    ``sigma`` is the chirp rate in Hz/s; the quadratic phase is taken
    about the centre of the native taps so magnitudes are unchanged.
    """
    if fs <= 0:
        raise ValueError("fs must be positive")
    if sigma == 0:
        return WindowSpec(
            taps=base.taps.copy(),
            native_length=base.native_length,
            fft_size=base.fft_size,
            chirp_rate=base.chirp_rate,
            label=base.label,
        )
    dt = 1.0 / fs
    rel = (np.arange(base.fft_size) - base.center_index) * dt
    factor = np.exp(1j * np.pi * sigma * rel * rel)  # 2*pi*sigma*t^2/2
    taps = base.taps.astype(np.complex128) * factor
    taps[base.native_length:] = 0.0
    return WindowSpec(
        taps=taps,
        native_length=base.native_length,
        fft_size=base.fft_size,
        chirp_rate=base.chirp_rate + sigma,
        label=f"{base.label}@{sigma:+g}Hz/s",
    )


def decay_report(window: WindowSpec, d_hz: float, fs: float, oversample: int = 8) -> DecayReport:
    """Supremum of ``|sum_l g[l] exp(-2*pi*i*u*l)|`` outside ``|u*fs| > d/2``.

    Evaluated on a zero-padded FFT grid at least ``oversample`` times
    denser than the window's own bin spacing; frequencies are folded into
    ``(-1/2, 1/2]`` cycles/sample.
    """
    if d_hz <= 0:
        raise ValueError("band width d must be positive")
    if oversample < 8:
        oversample = 8
    p = 1
    while p < oversample * window.fft_size:
        p *= 2
    spectrum = np.abs(np.fft.fft(window.taps, n=p))
    u = np.fft.fftfreq(p)  # folded normalized frequency in (-1/2, 1/2]
    outside = np.abs(u * fs) > d_hz / 2.0
    sup_out = float(spectrum[outside].max()) if np.any(outside) else 0.0
    return DecayReport(band_halfwidth_hz=d_hz / 2.0, sup_out=sup_out, grid_resolution_hz=fs / p)


def cola_check(window: WindowSpec, hop: int) -> dict:
    """Constancy of ``sum_n |g[j - n*hop]|^2`` over one hop period.

    Returns ``{"ok", "deviation", "constant"}`` where deviation is the
    best-constant relative sup deviation; ok iff deviation < 1e-10.
    """
    if hop < 1:
        raise ValueError("hop must be >= 1")
    power = np.abs(window.taps[: window.native_length]) ** 2
    cover = np.zeros(hop)
    for j in range(hop):
        cover[j] = power[j::hop].sum()
    cmax, cmin = float(cover.max()), float(cover.min())
    best = (cmax + cmin) / 2.0
    deviation = (cmax - cmin) / (2.0 * best) if best > 0 else float("inf")
    return {"ok": bool(deviation < 1e-10), "deviation": deviation, "constant": best}


def window_to_json(window: WindowSpec, fs: float | None = None) -> dict:
    taps = window.taps
    if window.is_complex:
        pairs = [[float(v.real), float(v.imag)] for v in taps]
    else:
        pairs = [[float(v), 0.0] for v in taps]
    doc = {
        "label": window.label,
        "chirp_rate": window.chirp_rate,
        "native_length": window.native_length,
        "fft_size": window.fft_size,
        "taps": pairs,
    }
    if fs is not None:
        doc["fs"] = fs
    return doc


def window_from_json(doc) -> WindowSpec:
    if isinstance(doc, str):
        doc = json.loads(doc)
    pairs = np.asarray(doc["taps"], dtype=float)
    taps = pairs[:, 0] + 1j * pairs[:, 1]
    if np.all(pairs[:, 1] == 0):
        taps = pairs[:, 0].copy()
    return WindowSpec(
        taps=taps,
        native_length=int(doc["native_length"]),
        fft_size=int(doc["fft_size"]),
        chirp_rate=float(doc.get("chirp_rate", 0.0)),
        label=str(doc.get("label", "")),
    )
