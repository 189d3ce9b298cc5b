"""Ridge sets, ridge-energy metrics, curve extraction, and mode synthesis.

A ridge of bandwidth ``q`` around a known frequency track collects, per
frame, the bins ``k`` with ``-1/2 - q <= K*dt*f[n] - k < 1/2 + q``.
Curve extraction follows local energy maxima greedily; modes are rebuilt
from the original quilted coefficients through the inverse reassignment
map and masked overlap-add inversion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .signals import DiscreteSignal
from .transform import QstftResult, istft_masked
from .reassign import InverseMap, SstMatrix

__all__ = [
    "RidgeCurve",
    "ModeReconstruction",
    "ridge_bin_range",
    "ridge_energy",
    "extract_ridge",
    "reconstruct_mode",
    "ridge_curve_to_csv",
]


@dataclass
class RidgeCurve:
    """Per-frame bin path on the squeezed grid, with per-frame energy."""

    start_frame: int
    bins: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        if self.bins.size != self.energy.size:
            raise ValueError("bins and energy must align")

    @property
    def n_frames(self) -> int:
        return self.bins.size

    @property
    def stop_frame(self) -> int:
        """Exclusive end frame."""
        return self.start_frame + self.bins.size

    def frames(self) -> np.ndarray:
        return np.arange(self.start_frame, self.stop_frame)


@dataclass
class ModeReconstruction:
    """Reconstructed mode plus bookkeeping from the curve walk."""

    signal: DiscreteSignal
    straddled_frames: int = 0
    discarded_entries: int = 0


def ridge_bin_range(if_hz: np.ndarray, q: int, kbins: int, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive per-frame bin bounds of the ridge set (may be empty after clipping)."""
    v = np.asarray(if_hz, dtype=float) * (kbins / fs)
    lo = np.floor(v - q - 0.5).astype(np.int64) + 1
    hi = np.floor(v + q + 0.5).astype(np.int64)
    return lo, hi


def _grid_bins(mat) -> int:
    return mat.kbins if hasattr(mat, "kbins") else mat.fft_size


def ridge_energy(mat, if_hz: np.ndarray, q: int, band: tuple[float, float]) -> float:
    """Percent of in-band energy that lies on the ridge of bandwidth ``q``.

    ``mat`` must be a real-valued energy representation; ``if_hz`` gives
    the per-frame ridge centre frequency on whatever time convention the
    representation's frames carry.  The denominator is the total over all
    frames of the bins inside ``band`` (half-open, Hz).
    """
    values = mat.values
    if values.dtype.kind == "c":
        raise ValueError("ridge energy needs a real energy representation")
    n, nb = values.shape
    if len(if_hz) != n:
        raise ValueError("need one ridge frequency per frame")
    kbins = _grid_bins(mat)
    f_lo, f_hi = band
    freqs = np.arange(nb) * (mat.fs / kbins)
    band_cols = (freqs >= f_lo) & (freqs < f_hi)
    if not band_cols.any():
        raise ValueError(f"band {band} contains no bins on this grid")
    denom = float(values[:, band_cols].sum())

    lo, hi = ridge_bin_range(np.asarray(if_hz), q, kbins, mat.fs)
    lo = np.clip(lo, 0, nb)
    hi = np.clip(hi + 1, 0, nb)  # exclusive
    cs = np.zeros((n, nb + 1))
    np.cumsum(values, axis=1, out=cs[:, 1:])
    numer = float((cs[np.arange(n), hi] - cs[np.arange(n), lo]).sum())
    if denom <= 0:
        return float("nan")
    return 100.0 * numer / denom


def extract_ridge(
    S: SstMatrix,
    count: int,
    jump_max: int = 8,
    min_energy: float = 0.05,
    suppress_halo: int = 16,
) -> tuple[list[RidgeCurve], bool]:
    """Greedy maximum-following extraction of up to ``count`` curves.

    Each curve seeds at the global maximum of the working copy, extends
    frame by frame to the best bin within ``jump_max`` bins of the previous
    one, and stops where the followed energy drops below ``min_energy``
    times that frame's maximum.  Extracted curves suppress a
    ``+/-suppress_halo``-bin neighbourhood before the next search.
    Returns the curves and a flag set when fewer than requested exist.
    """
    values = S.values
    if values.dtype.kind == "c":
        raise ValueError("ridge extraction needs a real energy representation")
    work = values.copy()
    n, nb = work.shape
    frame_max = values.max(axis=1)
    curves: list[RidgeCurve] = []
    exhausted = False

    for _ in range(count):
        seed_flat = int(np.argmax(work))
        n0, k0 = divmod(seed_flat, nb)
        if work[n0, k0] <= 0:
            exhausted = True
            break

        def walk(direction: int):
            path = []
            k = k0
            rng = range(n0 + direction, n if direction > 0 else -1, direction)
            for m in rng:
                lo = max(0, k - jump_max)
                hi = min(nb, k + jump_max + 1)
                k = lo + int(np.argmax(work[m, lo:hi]))
                if work[m, k] < min_energy * frame_max[m]:
                    break
                path.append((m, k))
            return path

        fwd = walk(+1)
        bwd = walk(-1)
        frames = [m for m, _ in reversed(bwd)] + [n0] + [m for m, _ in fwd]
        bins = [k for _, k in reversed(bwd)] + [k0] + [k for _, k in fwd]
        bins_arr = np.asarray(bins, dtype=np.int64)
        frames_arr = np.asarray(frames, dtype=np.int64)
        energy = work[frames_arr, bins_arr].astype(float)
        curves.append(RidgeCurve(start_frame=int(frames_arr[0]), bins=bins_arr, energy=energy))

        for m, k in zip(frames_arr, bins_arr):
            work[m, max(0, k - suppress_halo) : min(nb, k + suppress_halo + 1)] = 0.0

    if len(curves) < count:
        exhausted = True
    return curves, exhausted


def reconstruct_mode(
    analysis: QstftResult,
    invmap: InverseMap,
    curve: RidgeCurve,
    halo: int = 4,
    real_output: bool = False,
) -> ModeReconstruction:
    """Rebuild one mode from quilted coefficients along a squeezed-grid curve.

    Per frame, the source bins are the preimages of the curve bin's
    ``+/-halo`` neighbourhood; only entries of the window active at the
    curve bin are kept (frames whose halo straddles a tile boundary are
    counted).  Each window's masked transform is inverted by
    dual-normalized overlap-add and the per-window signals are summed.
    """
    fam = analysis.family
    hop = analysis.hop
    kbins = invmap.kbins
    grid = analysis.assignment.grid

    masks = [np.zeros(analysis.per_window[w].values.shape, dtype=bool) for w in range(fam.n_windows)]
    straddled = 0
    discarded = 0
    winner = analysis.assignment.winner

    for n, k_star in zip(curve.frames(), curve.bins):
        k_lo = max(0, int(k_star) - halo)
        k_hi = min(kbins - 1, int(k_star) + halo)
        r = min(int(n) // grid.tile_frames, grid.n_rows - 1)

        def tile_col(k):
            return min((int(k) * grid.f_min) // (kbins * grid.tile_bins), grid.n_cols - 1)

        w_n = int(winner[r, tile_col(k_star)])
        if winner[r, tile_col(k_lo)] != w_n or winner[r, tile_col(k_hi)] != w_n:
            straddled += 1

        wins, sources = invmap.preimage(int(n), k_lo, k_hi)
        keep = wins == w_n
        discarded += int(wins.size - keep.sum())
        masks[w_n][int(n), sources[keep]] = True

    out_len = (analysis.n_frames - 1) * hop + fam.max_fft_size
    out = np.zeros(out_len, dtype=np.complex128)
    for w in range(fam.n_windows):
        if not masks[w].any():
            continue
        part = istft_masked(analysis.per_window[w], masks[w], fam.windows[w], hop, real_output=False)
        out[: part.samples.size] += part.samples
    if real_output:
        out = 2.0 * out.real
    return ModeReconstruction(
        signal=DiscreteSignal(out, analysis.fs),
        straddled_frames=straddled,
        discarded_entries=discarded,
    )


def ridge_curve_to_csv(path, curve: RidgeCurve, fs: float, hop: int, kbins: int) -> None:
    """Write (frame, time_s, bin, freq_hz, energy) rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "time_s", "bin", "freq_hz", "energy"])
        for n, k, e in zip(curve.frames(), curve.bins, curve.energy):
            writer.writerow([int(n), n * hop / fs, int(k), k * fs / kbins, e])
