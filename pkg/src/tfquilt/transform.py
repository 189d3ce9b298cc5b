"""Discrete STFT / quilted STFT and masked overlap-add inversion.

Conventions: frame ``n`` starts at sample ``n*hop`` (time ``n*hop*dt``
seconds), bin ``k`` of an FFT-size-``L`` grid is ``k*fs/L`` Hz, and the
window multiplies the frame as ``f[l + n*hop] * conj(g[l])``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .signals import DiscreteSignal
from .windows import QuiltedFamily, WindowSpec

__all__ = [
    "TFMatrix",
    "QstftResult",
    "DataFormatError",
    "num_frames",
    "stft",
    "stft_freq_shifted",
    "qstft",
    "istft_masked",
    "interior_range",
    "overlap_add",
    "save_tfmatrix",
    "load_tfmatrix",
]


class DataFormatError(ValueError):
    """Raised on malformed serialized containers."""


@dataclass
class TFMatrix:
    """Complex or real matrix over the (frame, bin) lattice."""

    values: np.ndarray
    fft_size: int
    hop: int
    fs: float
    kind: str = "complex-stft"
    window_label: str = ""

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (frames x bins)")
        if self.hop < 1 or self.fs <= 0 or self.fft_size < 1:
            raise ValueError("invalid grid metadata")

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    def bin_freqs(self) -> np.ndarray:
        return np.arange(self.n_bins) * (self.fs / self.fft_size)

    def frame_times(self) -> np.ndarray:
        """Window-start times of each frame, seconds."""
        return np.arange(self.n_frames) * (self.hop / self.fs)

    def same_grid(self, other: "TFMatrix") -> bool:
        return (
            self.values.shape == other.values.shape
            and self.hop == other.hop
            and self.fft_size == other.fft_size
            and abs(self.fs - other.fs) < 1e-12 * self.fs
        )


def num_frames(signal_len: int, fft_size: int, hop: int) -> int:
    """Minimal frame count so the signal vanishes at/after the last frame's end."""
    if signal_len <= fft_size - 1:
        return 1
    return 1 + -(-(signal_len - (fft_size - 1)) // hop)


def _frame_matrix(samples: np.ndarray, fft_size: int, hop: int, n: int) -> np.ndarray:
    """Gather n frames of length fft_size with zero fill past the signal end."""
    needed = (n - 1) * hop + fft_size
    padded = np.zeros(needed, dtype=samples.dtype)
    m = min(samples.size, needed)
    padded[:m] = samples[:m]
    stride = padded.strides[0]
    frames = np.lib.stride_tricks.as_strided(
        padded, shape=(n, fft_size), strides=(hop * stride, stride)
    )
    return frames


def stft(
    signal: DiscreteSignal,
    window: WindowSpec,
    hop: int,
    n_frames_override: int | None = None,
) -> TFMatrix:
    """Windowed hopped DFT: ``V[n,k] = sum_l f[l+nH] conj(g[l]) e^{-2pi i k l / L}``."""
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if signal.n < 1:
        raise ValueError("empty signal")
    L = window.fft_size
    n = n_frames_override if n_frames_override is not None else num_frames(signal.n, L, hop)
    frames = _frame_matrix(signal.samples, L, hop, n)
    prod = frames * np.conj(window.taps)[None, :]
    values = np.fft.fft(prod, axis=1)
    return TFMatrix(
        values=values,
        fft_size=L,
        hop=hop,
        fs=signal.fs,
        kind="complex-stft",
        window_label=window.label,
    )


def stft_freq_shifted(
    signal: DiscreteSignal,
    window: WindowSpec,
    hop: int,
    n_frames_override: int | None = None,
) -> TFMatrix:
    """STFT with the normalized frequency advanced by ``dt``:

    ``V+[n,k] = sum_l f[l+nH] conj(g[l]) e^{-2pi i l (k/L + dt)}``,
    realized by modulating the window taps.
    """
    dt = 1.0 / signal.fs
    mod = np.exp(2j * np.pi * np.arange(window.fft_size) * dt)
    shifted = WindowSpec(
        taps=window.taps * mod,
        native_length=window.native_length,
        fft_size=window.fft_size,
        chirp_rate=window.chirp_rate,
        label=window.label + "+",
    )
    out = stft(signal, shifted, hop, n_frames_override)
    out.window_label = window.label
    return out


@dataclass
class QstftResult:
    """Per-window STFTs plus the tile assignment that selects the active one."""

    per_window: list
    family: QuiltedFamily
    assignment: "object"  # adapt.TileAssignment; kept loose to avoid an import cycle

    def __post_init__(self):
        n = {m.n_frames for m in self.per_window}
        h = {m.hop for m in self.per_window}
        if len(n) != 1 or len(h) != 1:
            raise ValueError("per-window matrices must share frame count and hop")

    @property
    def n_frames(self) -> int:
        return self.per_window[0].n_frames

    @property
    def hop(self) -> int:
        return self.per_window[0].hop

    @property
    def fs(self) -> float:
        return self.per_window[0].fs

    def active_mask(self, w: int) -> np.ndarray:
        """Boolean (frames x bins) mask where window ``w`` owns the lattice point."""
        mat = self.per_window[w]
        return self.assignment.active_mask(w, mat.fft_size, mat.n_frames)

    def active_values(self, w: int) -> np.ndarray:
        return np.where(self.active_mask(w), self.per_window[w].values, 0.0)


def qstft(signal: DiscreteSignal, family: QuiltedFamily, assignment) -> QstftResult:
    """Quilted STFT: one STFT per family window on a shared frame count.

    The active coefficient at each lattice point is the assigned window's;
    non-active coefficients are retained for diagnostics and shifts.
    """
    if assignment.n_windows != family.n_windows:
        raise ValueError("assignment window count does not match the family")
    hop = family.hop
    n = max(num_frames(signal.n, w.fft_size, hop) for w in family.windows)
    mats = [stft(signal, w, hop, n_frames_override=n) for w in family.windows]
    return QstftResult(per_window=mats, family=family, assignment=assignment)


def interior_range(fft_size: int, hop: int, n_frames: int) -> tuple[int, int]:
    """Inclusive sample range covered by full window overlap."""
    return fft_size - 1, (n_frames - 1) * hop


def overlap_add(
    rows: np.ndarray,
    frame_indices: np.ndarray,
    window_taps: np.ndarray,
    hop: int,
    out_len: int,
    numerator: np.ndarray,
    denominator: np.ndarray,
) -> None:
    """Accumulate dual-normalized synthesis terms for one window's frames.

    ``rows`` are time-domain frame contents (inverse DFTs of masked
    coefficient rows, i.e. ``f[l+nH]*conj(g[l])`` when unmasked); each is
    multiplied by the window and added at its frame offset, while
    ``|g|^2`` accumulates into the denominator.
    """
    L = window_taps.size
    power = np.abs(window_taps) ** 2
    synth = rows * window_taps[None, :]
    for row, n in zip(synth, frame_indices):
        start = int(n) * hop
        stop = min(start + L, out_len)
        if stop <= start:
            continue
        numerator[start:stop] += row[: stop - start]
        denominator[start:stop] += power[: stop - start]


def istft_masked(
    coeffs: TFMatrix,
    mask: np.ndarray,
    window: WindowSpec,
    hop: int,
    real_output: bool = False,
) -> DiscreteSignal:
    """Masked inverse STFT by dual-normalized overlap-add.

    ``x[j] = sum_n y_n[j-nH] g[j-nH] / sum_n |g[j-nH]|^2`` with ``y_n`` the
    inverse DFT of the masked coefficient row.  Raises if any index in the
    interior span has zero window coverage.  ``real_output`` returns
    ``2*Re(x)``, the analytic-ridge convention for real signals.
    """
    if mask.shape != coeffs.values.shape:
        raise ValueError("mask shape must match the coefficient matrix")
    if window.fft_size != coeffs.fft_size:
        raise ValueError("window FFT size does not match the coefficient grid")
    n, L = coeffs.values.shape
    out_len = (n - 1) * hop + L
    rows = np.fft.ifft(coeffs.values * mask, axis=1)

    numerator = np.zeros(out_len, dtype=np.complex128)
    denominator = np.zeros(out_len, dtype=np.float64)
    overlap_add(rows, np.arange(n), window.taps, hop, out_len, numerator, denominator)

    lo, hi = interior_range(L, hop, n)
    interior_cov = denominator[lo : hi + 1]
    if np.any(interior_cov == 0):
        bad = np.flatnonzero(interior_cov == 0) + lo
        raise ValueError(
            f"zero window coverage at samples {bad[0]}..{bad[-1]} inside the interior"
        )
    out = np.zeros(out_len, dtype=np.complex128)
    covered = denominator > 0
    out[covered] = numerator[covered] / denominator[covered]
    if real_output:
        return DiscreteSignal(2.0 * out.real, coeffs.fs)
    return DiscreteSignal(out, coeffs.fs)


_MAGIC = b"TFMATRX1"


def save_tfmatrix(path, mat) -> None:
    """Write a TFMatrix-like object to the binary container.

    Header is JSON (dtype, rows, cols, fs, hop, fft_size or kbins,
    window_label, kind); payload is row-major little-endian float64,
    complex values interleaved re,im.
    """
    values = mat.values
    is_complex = values.dtype.kind == "c"
    header = {
        "dtype": "c64f" if is_complex else "f64",
        "rows": int(values.shape[0]),
        "cols": int(values.shape[1]),
        "fs": float(mat.fs),
        "hop": int(mat.hop),
        "window_label": mat.window_label,
        "kind": mat.kind,
    }
    if hasattr(mat, "kbins"):
        header["kbins"] = int(mat.kbins)
    else:
        header["fft_size"] = int(mat.fft_size)
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        if is_complex:
            inter = np.empty(values.shape + (2,), dtype="<f8")
            inter[..., 0] = values.real
            inter[..., 1] = values.imag
            fh.write(inter.tobytes())
        else:
            fh.write(values.astype("<f8").tobytes())


def load_tfmatrix(path):
    """Read a TFMATRX1 container; returns (values, header)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise DataFormatError(f"bad magic {magic!r}; expected {_MAGIC!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"unreadable header: {exc}") from exc
        rows, cols = int(header["rows"]), int(header["cols"])
        if header["dtype"] == "c64f":
            raw = np.frombuffer(fh.read(rows * cols * 16), dtype="<f8")
            if raw.size != rows * cols * 2:
                raise DataFormatError("truncated complex payload")
            values = raw[0::2].reshape(rows, cols) + 1j * raw[1::2].reshape(rows, cols)
        elif header["dtype"] == "f64":
            raw = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
            if raw.size != rows * cols:
                raise DataFormatError("truncated real payload")
            values = raw.reshape(rows, cols).copy()
        else:
            raise DataFormatError(f"unknown dtype {header['dtype']!r}")
    return values, header


def tfmatrix_from_file(path) -> TFMatrix:
    values, header = load_tfmatrix(path)
    return TFMatrix(
        values=values,
        fft_size=int(header.get("fft_size", header.get("kbins"))),
        hop=int(header["hop"]),
        fs=float(header["fs"]),
        kind=header.get("kind", "complex-stft"),
        window_label=header.get("window_label", ""),
    )
