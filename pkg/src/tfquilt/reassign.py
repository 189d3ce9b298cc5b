"""Phase-difference reassignment operators and synchrosqueezing.

The reassignment frequency is the hop-free finite difference of the phase
spectrum under a one-sample signal advance,

    xi[n,k] = arg(V(f+)[n,k] / V(f)[n,k]) / (2*pi*dt),

which recovers the frequency of a complex constant chirp exactly at every
bin.  The reassignment time is the phase slope across a one-unit shift of
the normalized frequency grid,

    tau[n,k] = n*H*dt - arg(V+(f)[n,k] / V(f)[n,k]) / (2*pi),

exact for an isolated spike.  Squeezing relocates coefficient magnitude
(or the coefficients themselves) to the nearest bin of a finer K-grid.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .signals import DiscreteSignal, shift
from .transform import TFMatrix, QstftResult, stft, stft_freq_shifted, DataFormatError
from .windows import WindowSpec

__all__ = [
    "ReassignField",
    "SstMatrix",
    "InverseMap",
    "reassign_freq",
    "reassign_time",
    "reassign_freq_2nd",
    "second_order_field",
    "squeeze",
    "sst",
    "rm",
    "save_inverse_map",
    "load_inverse_map",
]


@dataclass
class ReassignField:
    """Per-bin reassignment frequency (Hz) and/or time (s); NaN = undefined."""

    xi: np.ndarray | None
    tau: np.ndarray | None
    gamma: float
    fs: float
    hop: int
    fft_size: int
    window_label: str = ""

    @property
    def shape(self):
        ref = self.xi if self.xi is not None else self.tau
        return ref.shape

    def defined(self) -> np.ndarray:
        ref = self.xi if self.xi is not None else self.tau
        return np.isfinite(ref)


def _check_same_grid(a: TFMatrix, b: TFMatrix):
    if not a.same_grid(b):
        raise ValueError("transforms live on different (frame, bin) grids")


def reassign_freq(V: TFMatrix, V_advanced: TFMatrix, gamma: float = 0.0) -> ReassignField:
    """Reassignment frequency from the transform of ``f`` and of ``f`` advanced one sample.

    Defined (finite) only where ``|V| > gamma`` and ``V != 0``; values lie
    in ``(-fs/2, fs/2]``.
    """
    _check_same_grid(V, V_advanced)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    mag = np.abs(V.values)
    ok = (mag > gamma) & (V.values != 0)
    xi = np.full(V.values.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ok, V_advanced.values, 0.0) / np.where(ok, V.values, 1.0)
    xi[ok] = np.angle(ratio[ok]) / (2.0 * np.pi * V.dt)
    return ReassignField(
        xi=xi, tau=None, gamma=gamma, fs=V.fs, hop=V.hop, fft_size=V.fft_size,
        window_label=V.window_label,
    )


def reassign_time(
    V: TFMatrix,
    V_freq_shifted: TFMatrix,
    gamma: float = 0.0,
    time_offset_samples: int = 0,
) -> ReassignField:
    """Reassignment time from the transform and its frequency-shifted twin.

    ``time_offset_samples`` moves the frame-time basis: when the analyzed
    signal is a +/-1 sample shift of a reference signal, passing +/-1 here
    re-expresses the reported event times on the reference clock (a signal
    advanced by one sample reports events one sample early).
    """
    _check_same_grid(V, V_freq_shifted)
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    mag = np.abs(V.values)
    ok = (mag > gamma) & (V.values != 0)
    tau = np.full(V.values.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ok, V_freq_shifted.values, 0.0) / np.where(ok, V.values, 1.0)
    frame_times = (np.arange(V.n_frames) * V.hop + time_offset_samples) * V.dt
    tau_ok = frame_times[:, None] - np.angle(ratio) / (2.0 * np.pi)
    tau[ok] = tau_ok[ok]
    return ReassignField(
        xi=None, tau=tau, gamma=gamma, fs=V.fs, hop=V.hop, fft_size=V.fft_size,
        window_label=V.window_label,
    )


def reassign_freq_2nd(
    xi_center: ReassignField,
    xi_minus: ReassignField,
    xi_plus: ReassignField,
    tau_center: ReassignField,
    tau_minus: ReassignField,
    tau_plus: ReassignField,
    fft_size: int | None = None,
    theta: float | None = None,
) -> ReassignField:
    """Second-order reassignment frequency via central differences.

    ``xi2 = xi + (D_t xi / D_t tau) * ((nH + floor(L/2))*dt - tau)``.  The
    time derivatives are estimated by two central differences of the same
    quantity: over the one-sample-shifted signals' fields and over the
    adjacent frames of the unshifted fields; per bin, the estimate with
    the larger ``|D_t tau|`` wins (the quotient degenerates where its
    denominator nears zero, and the two baselines degenerate on disjoint
    bin sets).  The tau fields of the shifted signals must be expressed on
    the unshifted signal's clock (build them with
    ``reassign_time(..., time_offset_samples=+/-1)``).  Falls back to the
    first-order value where the chosen ``|D_t tau| < theta`` or any needed
    field is undefined.
    """
    L = xi_center.fft_size if fft_size is None else fft_size
    dt = 1.0 / xi_center.fs
    hop = xi_center.hop
    if theta is None:
        # well above the float-noise floor of D_t tau (~1e-9 for pure tones),
        # far below any physical time slope (>= 1e-2 for window-resolved chirps)
        theta = 1e-6

    xi0 = xi_center.xi
    with np.errstate(invalid="ignore"):
        d_xi_s = (xi_plus.xi - xi_minus.xi) / (2.0 * dt)
        d_tau_s = (tau_plus.tau - tau_minus.tau) / (2.0 * dt)
        d_xi_f = np.full_like(xi0, np.nan)
        d_tau_f = np.full_like(xi0, np.nan)
        d_xi_f[1:-1] = (xi0[2:] - xi0[:-2]) / (2.0 * hop * dt)
        d_tau_f[1:-1] = (tau_center.tau[2:] - tau_center.tau[:-2]) / (2.0 * hop * dt)
    take_frame = np.isfinite(d_tau_f) & (
        ~np.isfinite(d_tau_s) | (np.abs(d_tau_f) > np.abs(d_tau_s))
    )
    d_xi = np.where(take_frame, d_xi_f, d_xi_s)
    d_tau = np.where(take_frame, d_tau_f, d_tau_s)

    n_frames = xi0.shape[0]
    t_center = (np.arange(n_frames) * hop + L // 2) * dt
    usable = (
        np.isfinite(d_xi)
        & np.isfinite(d_tau)
        & np.isfinite(tau_center.tau)
        & (np.abs(d_tau) >= theta)
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (d_xi / d_tau) * (t_center[:, None] - tau_center.tau)
    xi2 = np.where(usable & np.isfinite(xi0), xi0 + corr, xi0)
    return ReassignField(
        xi=xi2, tau=tau_center.tau, gamma=xi_center.gamma, fs=xi_center.fs,
        hop=hop, fft_size=L, window_label=xi_center.window_label,
    )


def second_order_field(
    signal: DiscreteSignal, window: WindowSpec, hop: int, gamma: float = 0.0
) -> tuple[TFMatrix, ReassignField]:
    """Transforms and combines all shifted fields for the second-order estimate.

    Returns the plain STFT (for squeezing) and the second-order frequency
    field.  Uses signal shifts -1, 0, +1, +2 and the frequency-shifted
    transforms of the -1/0/+1 shifts.
    """
    f_p = shift(signal, +1)
    f_m = shift(signal, -1)
    f_pp = shift(signal, +2)
    V = stft(signal, window, hop)
    n = V.n_frames
    V_p = stft(f_p, window, hop, n_frames_override=n)
    V_m = stft(f_m, window, hop, n_frames_override=n)
    V_pp = stft(f_pp, window, hop, n_frames_override=n)
    W_0 = stft_freq_shifted(signal, window, hop, n_frames_override=n)
    W_p = stft_freq_shifted(f_p, window, hop, n_frames_override=n)
    W_m = stft_freq_shifted(f_m, window, hop, n_frames_override=n)

    xi_0 = reassign_freq(V, V_p, gamma)
    xi_p = reassign_freq(V_p, V_pp, gamma)
    xi_m = reassign_freq(V_m, V, gamma)
    tau_0 = reassign_time(V, W_0, gamma)
    tau_p = reassign_time(V_p, W_p, gamma, time_offset_samples=+1)
    tau_m = reassign_time(V_m, W_m, gamma, time_offset_samples=-1)
    xi2 = reassign_freq_2nd(xi_0, xi_m, xi_p, tau_0, tau_m, tau_p)
    return V, xi2


@dataclass
class SstMatrix:
    """Squeezed representation on the K-bin grid (bin k <-> k*fs/K Hz)."""

    values: np.ndarray
    kbins: int
    hop: int
    fs: float
    kind: str  # "coefficient-sum" | "magnitude-sum" | "rm-energy"
    window_label: str = ""
    counters: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def fft_size(self) -> int:
        # squeezed matrices use the K grid as their frequency grid
        return self.kbins

    def bin_freqs(self) -> np.ndarray:
        return np.arange(self.kbins) * (self.fs / self.kbins)

    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * (self.hop / self.fs)


_EMPTY_COUNTERS = (
    "input_energy",
    "placed_energy",
    "dropped_negative_energy",
    "dropped_range_energy",
    "n_placed",
    "n_dropped_negative",
    "n_dropped_range",
)


def _new_counters(n_frames: int) -> dict:
    return {name: np.zeros(n_frames) for name in _EMPTY_COUNTERS}


def _squeeze_into(
    out: np.ndarray,
    counters: dict,
    values: np.ndarray,
    xi: np.ndarray,
    gamma: float,
    kbins: int,
    dt: float,
    mode: str,
    active: np.ndarray | None,
    collect_map: bool,
):
    """Accumulate one coefficient plane into the K-grid output.

    Returns (rows, targets, sources) index arrays of the placed bins when
    ``collect_map``; otherwise None.  Deterministic: coefficients are
    visited in row-major (frame, ascending bin) order.
    """
    n_frames = values.shape[0]
    considered = np.isfinite(xi) & (np.abs(values) > gamma) & (values != 0)
    if active is not None:
        considered &= active
    rows, cols = np.nonzero(considered)
    if rows.size == 0:
        return (rows, rows.copy(), cols) if collect_map else None
    v = values[rows, cols]
    energy = np.abs(v) ** 2
    x = xi[rows, cols]

    kdt = kbins * dt
    target_f = np.floor(kdt * x + 0.5)
    neg = x < 0
    oor = ~neg & (target_f >= kbins)
    placed = ~neg & ~oor

    def frame_sum(mask, weights=None):
        w = weights[mask] if weights is not None else None
        return np.bincount(rows[mask], weights=w, minlength=n_frames)

    all_mask = np.ones(rows.size, dtype=bool)
    counters["input_energy"] += frame_sum(all_mask, energy)
    counters["dropped_negative_energy"] += frame_sum(neg, energy)
    counters["dropped_range_energy"] += frame_sum(oor, energy)
    counters["n_dropped_negative"] += frame_sum(neg)
    counters["n_dropped_range"] += frame_sum(oor)
    counters["n_placed"] += frame_sum(placed)
    counters["placed_energy"] += frame_sum(placed, energy)

    pr = rows[placed]
    pk = target_f[placed].astype(np.int64)
    flat = pr * kbins + pk
    if mode == "magnitude":
        out += np.bincount(flat, weights=energy[placed], minlength=out.size).reshape(out.shape)
    else:
        pv = v[placed]
        re = np.bincount(flat, weights=pv.real, minlength=out.size)
        im = np.bincount(flat, weights=pv.imag, minlength=out.size)
        out += (re + 1j * im).reshape(out.shape)

    if collect_map:
        return pr, pk, cols[placed]
    return None


def squeeze(
    V: TFMatrix,
    xi_field: ReassignField,
    kbins: int,
    mode: str = "magnitude",
    gamma: float = 0.0,
    active: np.ndarray | None = None,
    build_inverse_map: bool = False,
):
    """Squeeze one coefficient plane along frequency onto a K-bin grid.

    Above-tolerance coefficients with defined nonnegative reassignment
    frequency move to bin ``floor(K*dt*xi + 1/2)``; magnitudes squared
    (``mode="magnitude"``) or the raw coefficients (``mode="coeff"``) are
    accumulated.  Negative or out-of-range targets are dropped and counted.
    """
    if mode not in ("magnitude", "coeff"):
        raise ValueError("mode must be 'magnitude' or 'coeff'")
    if kbins < V.fft_size:
        raise ValueError("output grid must be at least as fine as the input grid")
    if xi_field.xi is None or xi_field.xi.shape != V.values.shape:
        raise ValueError("frequency field does not match the transform grid")
    n = V.n_frames
    dtype = np.float64 if mode == "magnitude" else np.complex128
    out = np.zeros((n, kbins), dtype=dtype)
    counters = _new_counters(n)
    idx = _squeeze_into(
        out, counters, V.values, xi_field.xi, gamma, kbins, V.dt, mode, active,
        build_inverse_map,
    )
    mat = SstMatrix(
        values=out,
        kbins=kbins,
        hop=V.hop,
        fs=V.fs,
        kind="magnitude-sum" if mode == "magnitude" else "coefficient-sum",
        window_label=V.window_label,
        counters=counters,
    )
    if build_inverse_map:
        rows, targets, sources = idx
        invmap = InverseMap.from_entries(
            n_frames=n, kbins=kbins,
            frames=rows, targets=targets,
            windows=np.zeros(rows.size, dtype=np.int64), sources=sources,
        )
        return mat, invmap
    return mat, None


def sst(
    analysis: QstftResult,
    analysis_advanced: QstftResult,
    gamma: float = 0.0,
    kbins: int | None = None,
    mode: str = "magnitude",
    build_inverse_map: bool = True,
):
    """Synchrosqueeze a quilted analysis onto a shared K-grid.

    Per window, the reassignment frequency comes from that window's
    transforms of ``f`` and of ``f`` advanced one sample; only the
    coefficients whose supertile selected the window are squeezed, so the
    active planes partition the lattice.
    """
    if mode not in ("magnitude", "coeff"):
        raise ValueError("mode must be 'magnitude' or 'coeff'")
    fam = analysis.family
    if analysis_advanced.family is not fam and [w.label for w in analysis_advanced.family.windows] != [w.label for w in fam.windows]:
        raise ValueError("both analyses must use the same window family")
    l_max = max(m.fft_size for m in analysis.per_window)
    if kbins is None:
        kbins = 4 * l_max
    if kbins < l_max:
        raise ValueError("kbins must be >= the largest window FFT size")

    n = analysis.n_frames
    dtype = np.float64 if mode == "magnitude" else np.complex128
    out = np.zeros((n, kbins), dtype=dtype)
    counters = _new_counters(n)
    map_parts = []
    for w, (V, V_adv) in enumerate(zip(analysis.per_window, analysis_advanced.per_window)):
        field_w = reassign_freq(V, V_adv, gamma)
        active = analysis.active_mask(w)
        idx = _squeeze_into(
            out, counters, V.values, field_w.xi, gamma, kbins, V.dt, mode,
            active, build_inverse_map,
        )
        if build_inverse_map:
            rows, targets, sources = idx
            map_parts.append((rows, targets, np.full(rows.size, w, dtype=np.int64), sources))

    label = "+".join(w.label for w in fam.windows)
    mat = SstMatrix(
        values=out, kbins=kbins, hop=analysis.hop, fs=analysis.fs,
        kind="magnitude-sum" if mode == "magnitude" else "coefficient-sum",
        window_label=label, counters=counters,
    )
    if build_inverse_map:
        rows = np.concatenate([p[0] for p in map_parts]) if map_parts else np.empty(0, np.int64)
        targets = np.concatenate([p[1] for p in map_parts]) if map_parts else np.empty(0, np.int64)
        windows = np.concatenate([p[2] for p in map_parts]) if map_parts else np.empty(0, np.int64)
        sources = np.concatenate([p[3] for p in map_parts]) if map_parts else np.empty(0, np.int64)
        invmap = InverseMap.from_entries(n, kbins, rows, targets, windows, sources)
        return mat, invmap
    return mat, None


def rm(
    V: TFMatrix,
    xi_field: ReassignField,
    tau_field: ReassignField,
    gamma: float = 0.0,
    kbins: int | None = None,
) -> SstMatrix:
    """Classical reassignment: move ``|V|^2`` in both time and frequency.

    Targets are the K-grid bin of the reassignment frequency and the frame
    whose start time is nearest the reassignment time (clamped to the
    frame range).
    """
    if xi_field.xi is None or tau_field.tau is None:
        raise ValueError("need a frequency field and a time field")
    if xi_field.xi.shape != V.values.shape or tau_field.tau.shape != V.values.shape:
        raise ValueError("fields do not match the transform grid")
    if kbins is None:
        kbins = 4 * V.fft_size
    n = V.n_frames
    out = np.zeros((n, kbins))
    counters = _new_counters(n)

    considered = (
        np.isfinite(xi_field.xi)
        & np.isfinite(tau_field.tau)
        & (np.abs(V.values) > gamma)
        & (V.values != 0)
    )
    rows, cols = np.nonzero(considered)
    if rows.size:
        energy = np.abs(V.values[rows, cols]) ** 2
        x = xi_field.xi[rows, cols]
        t = tau_field.tau[rows, cols]
        kdt = kbins / V.fs
        target_f = np.floor(kdt * x + 0.5)
        neg = x < 0
        oor = ~neg & (target_f >= kbins)
        placed = ~neg & ~oor

        def frame_sum(mask, idx, weights=None):
            w = weights[mask] if weights is not None else None
            return np.bincount(idx[mask], weights=w, minlength=n)

        all_mask = np.ones(rows.size, dtype=bool)
        counters["input_energy"] += frame_sum(all_mask, rows, energy)
        counters["dropped_negative_energy"] += frame_sum(neg, rows, energy)
        counters["dropped_range_energy"] += frame_sum(oor, rows, energy)
        counters["n_dropped_negative"] += frame_sum(neg, rows)
        counters["n_dropped_range"] += frame_sum(oor, rows)
        counters["n_placed"] += frame_sum(placed, rows)

        hop_t = V.hop * V.dt
        target_n = np.clip(np.rint(t[placed] / hop_t).astype(np.int64), 0, n - 1)
        pk = target_f[placed].astype(np.int64)
        flat = target_n * kbins + pk
        out += np.bincount(flat, weights=energy[placed], minlength=out.size).reshape(out.shape)
        counters["placed_energy"] += np.bincount(target_n, weights=energy[placed], minlength=n)

    return SstMatrix(
        values=out, kbins=kbins, hop=V.hop, fs=V.fs, kind="rm-energy",
        window_label=V.window_label, counters=counters,
    )


@dataclass
class InverseMap:
    """Source bins whose reassignment landed at each (frame, K-bin) target.

    Stored as flat entry arrays sorted by (frame, target bin); preimages
    per frame are disjoint and together cover exactly the placed bins.
    """

    n_frames: int
    kbins: int
    frames: np.ndarray
    targets: np.ndarray
    windows: np.ndarray
    sources: np.ndarray
    _keys: np.ndarray = field(default=None, repr=False)

    @staticmethod
    def from_entries(n_frames, kbins, frames, targets, windows, sources) -> "InverseMap":
        keys = frames.astype(np.int64) * kbins + targets
        order = np.argsort(keys, kind="stable")
        return InverseMap(
            n_frames=n_frames,
            kbins=kbins,
            frames=frames[order],
            targets=targets[order],
            windows=windows[order],
            sources=sources[order],
            _keys=keys[order],
        )

    @property
    def n_entries(self) -> int:
        return self.frames.size

    def preimage(self, frame: int, k_lo: int, k_hi: int):
        """(window, source-bin) arrays for targets in ``[k_lo, k_hi]`` at one frame."""
        lo = np.searchsorted(self._keys, frame * self.kbins + k_lo, side="left")
        hi = np.searchsorted(self._keys, frame * self.kbins + k_hi, side="right")
        return self.windows[lo:hi], self.sources[lo:hi]


_MAGIC = b"TFMATRX1"


def save_inverse_map(path, invmap: InverseMap, fs: float = 0.0, hop: int = 0) -> None:
    """Serialize the map as a ragged entry list in the binary container."""
    header = {
        "dtype": "i64",
        "rows": int(invmap.n_frames),
        "cols": 4,
        "fs": float(fs),
        "hop": int(hop),
        "kbins": int(invmap.kbins),
        "window_label": "",
        "kind": "inverse-map",
        "entries": int(invmap.n_entries),
    }
    blob = json.dumps(header).encode("utf-8")
    table = np.empty((invmap.n_entries, 4), dtype="<i8")
    table[:, 0] = invmap.frames
    table[:, 1] = invmap.targets
    table[:, 2] = invmap.windows
    table[:, 3] = invmap.sources
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(table.tobytes())


def load_inverse_map(path) -> InverseMap:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise DataFormatError(f"bad magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("kind") != "inverse-map":
            raise DataFormatError("container does not hold an inverse map")
        e = int(header["entries"])
        raw = np.frombuffer(fh.read(e * 4 * 8), dtype="<i8")
        if raw.size != e * 4:
            raise DataFormatError("truncated inverse map payload")
        table = raw.reshape(e, 4)
    return InverseMap.from_entries(
        n_frames=int(header["rows"]),
        kbins=int(header["kbins"]),
        frames=table[:, 0].copy(),
        targets=table[:, 1].copy(),
        windows=table[:, 2].copy(),
        sources=table[:, 3].copy(),
    )
