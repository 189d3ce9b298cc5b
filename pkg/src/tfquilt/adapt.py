"""Entropy-driven window selection over time-frequency supertiles.

The plane is tiled into rectangles of ``A`` hops by ``B`` coarse frequency
bins (coarse = the smallest FFT grid in the family).  Each tile gets the
window whose coefficients inside it have the smallest sampled Renyi
entropy; the perturbation-averaged variant additionally averages the
entropy over axis-aligned translates of the tile before comparing.

Box membership is half-open on both axes and evaluated in exact integer
arithmetic: a lattice point of window ``w`` at (frame ``n``, bin ``k``)
has time index ``n`` in hop units and frequency ``k * f_min / L_w`` in
coarse-bin units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SupertileGrid",
    "PerturbationSpec",
    "TileAssignment",
    "renyi_entropy",
    "select_single_pass",
    "select_perturbation_averaged",
    "constant_assignment",
]


@dataclass(frozen=True)
class SupertileGrid:
    """Supertile geometry: A hops by B coarse bins per tile."""

    tile_frames: int  # A
    tile_bins: int  # B, in coarse-grid bins
    hop: int
    fs: float
    f_min: int  # coarsest FFT size in the family
    n_frames: int

    def __post_init__(self):
        if self.tile_frames < 1 or self.tile_bins < 1:
            raise ValueError("supertile extents must be >= 1")
        if self.hop < 1 or self.f_min < 1 or self.n_frames < 1:
            raise ValueError("invalid grid parameters")

    @property
    def tile_duration_s(self) -> float:
        return self.tile_frames * self.hop / self.fs

    @property
    def tile_height_hz(self) -> float:
        return self.tile_bins * self.fs / self.f_min

    @property
    def n_rows(self) -> int:
        """Tile count along time (index r)."""
        return -(-self.n_frames // self.tile_frames)

    @property
    def n_cols(self) -> int:
        """Tile count along frequency (index s), covering [0, fs)."""
        return -(-self.f_min // self.tile_bins)


@dataclass(frozen=True)
class PerturbationSpec:
    """Axis-aligned tile translations for entropy averaging.

    Steps are in coarsest-grid points, shifts count translations per
    direction, and direction sets are subsets of {-1, +1}.
    """

    t_step: int = 1
    y_step: int = 1
    t_shift: int = 0
    y_shift: int = 0
    dirs_t: tuple = (-1, 1)
    dirs_y: tuple = (-1, 1)

    def __post_init__(self):
        if self.t_shift > 0 and (self.t_step < 1 or not self.dirs_t):
            raise ValueError("time perturbations need step >= 1 and a direction set")
        if self.y_shift > 0 and (self.y_step < 1 or not self.dirs_y):
            raise ValueError("frequency perturbations need step >= 1 and a direction set")
        for d in tuple(self.dirs_t) + tuple(self.dirs_y):
            if d not in (-1, 1):
                raise ValueError("directions must be -1 or +1")

    def time_offsets(self) -> list[int]:
        """Nonzero tile translations along time, in hop units."""
        return sorted(p * t * self.t_step for p in self.dirs_t for t in range(1, self.t_shift + 1))

    def freq_offsets(self) -> list[int]:
        """Nonzero tile translations along frequency, in coarse-bin units."""
        return sorted(p * y * self.y_step for p in self.dirs_y for y in range(1, self.y_shift + 1))

    def box_count(self) -> int:
        return 1 + len(self.time_offsets()) + len(self.freq_offsets())


@dataclass
class TileAssignment:
    """Winning window per supertile, with the entropy table that decided it."""

    winner: np.ndarray  # (n_rows, n_cols) int window indices
    grid: SupertileGrid
    n_windows: int
    entropies: np.ndarray | None = None  # (W, n_rows, n_cols), nats
    method: str = ""

    def window_for_tile(self, r: int, s: int) -> int:
        return int(self.winner[r, s])

    def col_index_for_bins(self, fft_size: int, n_bins: int | None = None) -> np.ndarray:
        """Tile column s for each bin k of an FFT-size grid (exact integers)."""
        nb = fft_size if n_bins is None else n_bins
        k = np.arange(nb, dtype=np.int64)
        s = (k * self.grid.f_min) // (fft_size * self.grid.tile_bins)
        return np.clip(s, 0, self.grid.n_cols - 1)

    def row_index_for_frames(self, n_frames: int) -> np.ndarray:
        r = np.arange(n_frames, dtype=np.int64) // self.grid.tile_frames
        return np.clip(r, 0, self.grid.n_rows - 1)

    def active_mask(self, w: int, fft_size: int, n_frames: int) -> np.ndarray:
        if not (0 <= w < self.n_windows):
            raise ValueError(f"window index {w} outside the family (W={self.n_windows})")
        rows = self.row_index_for_frames(n_frames)
        cols = self.col_index_for_bins(fft_size)
        return self.winner[np.ix_(rows, cols)] == w

    def window_index_image(self, n_frames: int, kbins: int, kbins_grid: int | None = None) -> np.ndarray:
        """Window index at each (frame, K-grid bin); companion matrix for plots."""
        kgrid = kbins if kbins_grid is None else kbins_grid
        rows = self.row_index_for_frames(n_frames)
        k = np.arange(kbins, dtype=np.int64)
        cols = np.clip((k * self.grid.f_min) // (kgrid * self.grid.tile_bins), 0, self.grid.n_cols - 1)
        return self.winner[np.ix_(rows, cols)]

    def to_json(self, include_entropies: bool = False) -> dict:
        doc = {
            "tile_frames": self.grid.tile_frames,
            "tile_bins": self.grid.tile_bins,
            "hop": self.grid.hop,
            "fs": self.grid.fs,
            "f_min": self.grid.f_min,
            "n_frames": self.grid.n_frames,
            "n_windows": self.n_windows,
            "method": self.method,
            "winner": self.winner.tolist(),
        }
        if include_entropies and self.entropies is not None:
            ent = np.where(np.isfinite(self.entropies), self.entropies, None)
            doc["entropies"] = ent.tolist()
        return doc

    @staticmethod
    def from_json(doc) -> "TileAssignment":
        if isinstance(doc, str):
            doc = json.loads(doc)
        grid = SupertileGrid(
            tile_frames=int(doc["tile_frames"]),
            tile_bins=int(doc["tile_bins"]),
            hop=int(doc["hop"]),
            fs=float(doc["fs"]),
            f_min=int(doc["f_min"]),
            n_frames=int(doc["n_frames"]),
        )
        return TileAssignment(
            winner=np.asarray(doc["winner"], dtype=np.int64),
            grid=grid,
            n_windows=int(doc["n_windows"]),
            method=doc.get("method", ""),
        )


def _entropy_from_sums(p_sum: float, e_sum: float, alpha: float, hop: int, fft_size: int) -> float:
    """Renyi entropy from box sums of |V|^(2a) and |V|^2 (nats)."""
    if e_sum <= 0 or p_sum <= 0:
        return math.inf
    return alpha * math.log(hop / fft_size) + (math.log(p_sum) - alpha * math.log(e_sum)) / (1.0 - alpha)


def renyi_entropy(tfmat, box, alpha: float, hop: int | None = None, fft_size: int | None = None) -> float:
    """Sampled Renyi entropy of the coefficients whose lattice points fall in ``box``.

    ``box = (t0, t1, f0, f1)`` in seconds/Hz, half-open on both axes.  A
    coefficient at (frame n, bin k) sits at ``(n*hop*dt, k*fs/L)``.  The
    weight of each coefficient is ``(hop/L)^(1-a) * |V|^2 / E`` with ``E``
    the in-box energy; zero in-box energy yields +inf.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    hop = tfmat.hop if hop is None else hop
    fft_size = tfmat.fft_size if fft_size is None else fft_size
    t0, t1, f0, f1 = box
    times = tfmat.frame_times()
    freqs = tfmat.bin_freqs()
    rows = (times >= t0) & (times < t1)
    cols = (freqs >= f0) & (freqs < f1)
    if not rows.any() or not cols.any():
        return math.inf
    sq = np.abs(tfmat.values[np.ix_(rows, cols)]) ** 2
    e_sum = float(sq.sum())
    p_sum = float((sq**alpha).sum())
    return _entropy_from_sums(p_sum, e_sum, alpha, hop, fft_size)


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _prefix(mat: np.ndarray) -> np.ndarray:
    out = np.zeros((mat.shape[0] + 1, mat.shape[1] + 1))
    np.cumsum(mat, axis=0, out=out[1:, 1:])
    np.cumsum(out[1:, 1:], axis=1, out=out[1:, 1:])
    return out


def _box_sums(pref: np.ndarray, r0: np.ndarray, r1: np.ndarray, c0: np.ndarray, c1: np.ndarray) -> np.ndarray:
    """Rectangle sums over [r0,r1) x [c0,c1) for broadcastable index arrays."""
    return pref[r1, c1] - pref[r0, c1] - pref[r1, c0] + pref[r0, c0]


class _EntropyEngine:
    """Prefix-summed per-window entropy evaluation over translated tiles."""

    def __init__(self, matrices, grid: SupertileGrid, alpha: float):
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        hops = {m.hop for m in matrices}
        if len(hops) != 1:
            raise ValueError("all windows must share the hop size")
        self.grid = grid
        self.alpha = alpha
        self.mats = matrices
        self.pref_e = []
        self.pref_p = []
        for m in matrices:
            sq = np.abs(m.values) ** 2
            self.pref_e.append(_prefix(sq))
            self.pref_p.append(_prefix(sq**alpha))

    def entropies_for_offset(self, dt_hops: int, dy_coarse: int) -> np.ndarray:
        """(W, n_rows, n_cols) entropies of every tile translated by the offset.

        Tiles with no lattice points or zero energy get +inf.
        """
        g = self.grid
        r_idx = np.arange(g.n_rows)
        s_idx = np.arange(g.n_cols)
        a0 = r_idx * g.tile_frames + dt_hops
        a1 = a0 + g.tile_frames
        b0 = s_idx * g.tile_bins + dy_coarse
        b1 = b0 + g.tile_bins

        out = np.empty((len(self.mats), g.n_rows, g.n_cols))
        for w, m in enumerate(self.mats):
            n, lw = m.values.shape
            rows0 = np.clip(a0, 0, n)
            rows1 = np.clip(a1, 0, n)
            # frequency membership: b0 <= k*f_min/L_w < b1, solved for integer k
            cols0 = np.clip([_ceil_div(b * lw, g.f_min) for b in b0], 0, lw)
            cols1 = np.clip([_ceil_div(b * lw, g.f_min) for b in b1], 0, lw)
            cols0 = np.asarray(cols0)
            cols1 = np.asarray(cols1)
            e = _box_sums(self.pref_e[w], rows0[:, None], rows1[:, None], cols0[None, :], cols1[None, :])
            p = _box_sums(self.pref_p[w], rows0[:, None], rows1[:, None], cols0[None, :], cols1[None, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                r = self.alpha * math.log(m.hop / lw) + (np.log(p) - self.alpha * np.log(e)) / (1.0 - self.alpha)
            empty = (rows1[:, None] <= rows0[:, None]) | (cols1[None, :] <= cols0[None, :])
            r = np.where(empty | (e <= 0) | (p <= 0), np.inf, r)
            out[w] = r
        return out


def _fill_unresolved(winner: np.ndarray, resolved: np.ndarray) -> np.ndarray:
    """Assign unresolved tiles from the Chebyshev-nearest resolved tile.

    Ties at equal distance resolve to the smallest window index among the
    candidates.  If nothing is resolved, everything falls back to 0.
    """
    if resolved.all():
        return winner
    if not resolved.any():
        return np.zeros_like(winner)
    out = winner.copy()
    n_rows, n_cols = winner.shape
    max_d = max(n_rows, n_cols)
    for r, s in zip(*np.nonzero(~resolved)):
        for d in range(1, max_d + 1):
            r0, r1 = max(0, r - d), min(n_rows, r + d + 1)
            c0, c1 = max(0, s - d), min(n_cols, s + d + 1)
            block = resolved[r0:r1, c0:c1]
            if block.any():
                out[r, s] = int(winner[r0:r1, c0:c1][block].min())
                break
    return out


def _assignment_from_entropies(avg: np.ndarray, grid: SupertileGrid, method: str) -> TileAssignment:
    winner = np.argmin(avg, axis=0).astype(np.int64)  # ties resolve to the lowest index
    resolved = np.isfinite(np.min(avg, axis=0))
    winner = _fill_unresolved(winner, resolved)
    return TileAssignment(
        winner=winner, grid=grid, n_windows=avg.shape[0], entropies=avg, method=method
    )


def select_single_pass(matrices, grid: SupertileGrid, alpha: float) -> TileAssignment:
    """Per tile, pick the window with the smallest sampled Renyi entropy."""
    engine = _EntropyEngine(matrices, grid, alpha)
    ent = engine.entropies_for_offset(0, 0)
    return _assignment_from_entropies(ent, grid, method="single-pass")


def select_perturbation_averaged(
    matrices, grid: SupertileGrid, alpha: float, pert: PerturbationSpec
) -> TileAssignment:
    """Pick per tile the window minimizing the perturbation-averaged entropy.

    The average runs over the tile itself plus its time-only and
    frequency-only translates; translates with no lattice points (or no
    energy) are dropped from the average with the divisor reduced.
    """
    engine = _EntropyEngine(matrices, grid, alpha)
    offsets = [(0, 0)]
    offsets += [(dt, 0) for dt in pert.time_offsets()]
    offsets += [(0, dy) for dy in pert.freq_offsets()]

    total = np.zeros((len(matrices), grid.n_rows, grid.n_cols))
    count = np.zeros_like(total)
    for dt_hops, dy_coarse in offsets:
        ent = engine.entropies_for_offset(dt_hops, dy_coarse)
        finite = np.isfinite(ent)
        total[finite] += ent[finite]
        count += finite
    with np.errstate(invalid="ignore"):
        avg = np.where(count > 0, total / np.maximum(count, 1), np.inf)
    return _assignment_from_entropies(avg, grid, method="perturbation-averaged")


def constant_assignment(grid: SupertileGrid, n_windows: int, w: int = 0) -> TileAssignment:
    """Every tile assigned to window ``w`` (degenerate quilting)."""
    if not (0 <= w < n_windows):
        raise ValueError("window index outside the family")
    winner = np.full((grid.n_rows, grid.n_cols), w, dtype=np.int64)
    return TileAssignment(winner=winner, grid=grid, n_windows=n_windows, method="constant")


def grid_for(family, n_frames: int, fs: float, tile_frames: int, tile_bins: int) -> SupertileGrid:
    """Supertile grid matching a window family and frame count."""
    return SupertileGrid(
        tile_frames=tile_frames,
        tile_bins=tile_bins,
        hop=family.hop,
        fs=fs,
        f_min=family.min_fft_size,
        n_frames=n_frames,
    )
