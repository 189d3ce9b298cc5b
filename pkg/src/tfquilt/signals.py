"""Synthetic multicomponent signals, noise injection, and shift utilities.

Signals are uniformly sampled sequences of complex (or real) amplitudes.
Components are amplitude/phase pairs with linear instantaneous frequency
``c + sigma*t`` (polynomial phase of degree <= 2); arbitrary behaviour can
be injected through sampled amplitude/phase arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DiscreteSignal",
    "ComponentSpec",
    "ClassReport",
    "synth_components",
    "add_noise",
    "validate_class",
    "shift",
    "crossing_chirps_spec",
    "load_signal_spec",
]


@dataclass(frozen=True)
class DiscreteSignal:
    """Uniformly sampled signal with sample rate ``fs`` (Hz)."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("signal must be a nonempty 1-D sequence")
        if not (self.fs > 0):
            raise ValueError("sample rate must be positive")
        if not np.all(np.isfinite(samples.view(np.float64) if samples.dtype.kind == "c" else samples)):
            raise ValueError("signal contains NaN or Inf samples")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def duration(self) -> float:
        return self.n / self.fs

    @property
    def is_real(self) -> bool:
        return self.samples.dtype.kind != "c"

    def times(self) -> np.ndarray:
        return np.arange(self.n) / self.fs


AmplitudeLike = float | Callable[[np.ndarray], np.ndarray]


@dataclass
class ComponentSpec:
    """One amplitude/phase component.

    ``offset_hz`` and ``chirp_rate`` define the linear instantaneous
    frequency ``f(t) = offset_hz + chirp_rate * t`` (Hz); the phase in
    cycles is its integral plus ``phase0_cycles``.  ``amp_samples`` /
    ``phase_samples`` (cycles), when given, override the parametric forms
    and must match the synthesis grid length.
    """

    offset_hz: float = 0.0
    chirp_rate: float = 0.0
    amplitude: AmplitudeLike = 1.0
    phase0_cycles: float = 0.0
    amp_samples: np.ndarray | None = None
    phase_samples: np.ndarray | None = None

    def amplitude_at(self, t: np.ndarray) -> np.ndarray:
        if self.amp_samples is not None:
            a = np.asarray(self.amp_samples, dtype=float)
            if a.size != t.size:
                raise ValueError("amp_samples length does not match the time grid")
            return a
        if callable(self.amplitude):
            return np.asarray(self.amplitude(t), dtype=float)
        return np.full(t.shape, float(self.amplitude))

    def phase_at(self, t: np.ndarray) -> np.ndarray:
        """Phase in cycles on the grid ``t``."""
        if self.phase_samples is not None:
            p = np.asarray(self.phase_samples, dtype=float)
            if p.size != t.size:
                raise ValueError("phase_samples length does not match the time grid")
            return p
        return self.phase0_cycles + self.offset_hz * t + 0.5 * self.chirp_rate * t * t

    def if_at(self, t: np.ndarray) -> np.ndarray:
        """Instantaneous frequency in Hz on the grid ``t``."""
        if self.phase_samples is not None:
            p = np.asarray(self.phase_samples, dtype=float)
            dt = float(t[1] - t[0]) if t.size > 1 else 1.0
            return np.gradient(p, dt)
        return self.offset_hz + self.chirp_rate * t


@dataclass
class ClassReport:
    """Finite-difference admissibility diagnostics for a component set."""

    eps_rate: float
    d_hz: float
    sup_amp_rate: list[float] = field(default_factory=list)
    sup_if_rate: list[float] = field(default_factory=list)
    min_separation_hz: float = math.inf
    amplitude_positive: bool = True
    if_positive: bool = True
    amp_slowly_varying: bool = True
    if_slowly_varying: bool = True
    well_separated: bool = True

    @property
    def all_ok(self) -> bool:
        return (
            self.amplitude_positive
            and self.if_positive
            and self.amp_slowly_varying
            and self.if_slowly_varying
            and self.well_separated
        )


def synth_components(
    specs: Sequence[ComponentSpec],
    duration: float,
    fs: float,
    real_valued: bool = False,
) -> DiscreteSignal:
    """Sum of components ``A_m(t) exp(2*pi*i*phi_m(t))`` on a uniform grid.

    ``real_valued`` returns the real part, i.e. a sum of cosines.  Every
    component's instantaneous frequency must stay inside ``(0, fs/2)`` over
    the whole duration; the first offending component and time are named
    in the error.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not specs:
        raise ValueError("need at least one component")
    n = int(round(duration * fs))
    if n < 1:
        raise ValueError("duration shorter than one sample")
    t = np.arange(n) / fs

    for m, spec in enumerate(specs):
        f_inst = spec.if_at(t)
        bad = np.flatnonzero((f_inst <= 0) | (f_inst >= fs / 2))
        if bad.size:
            j = int(bad[0])
            raise ValueError(
                f"component {m}: instantaneous frequency {f_inst[j]:.3f} Hz at "
                f"t={t[j]:.6f} s lies outside (0, {fs / 2:.1f}) Hz"
            )

    out = np.zeros(n, dtype=np.complex128)
    for spec in specs:
        out += spec.amplitude_at(t) * np.exp(2j * np.pi * spec.phase_at(t))
    if real_valued:
        return DiscreteSignal(out.real.copy(), fs)
    return DiscreteSignal(out, fs)


def add_noise(
    signal: DiscreteSignal,
    target_snr_db: float,
    seed: int,
    return_noise: bool = False,
):
    """Add zero-mean white Gaussian noise at an exact realized SNR.

    The drawn noise is rescaled so that
    ``10*log10(var(signal)/var(noise))`` equals ``target_snr_db`` for this
    realization.  ``target_snr_db = inf`` is the no-noise sentinel.
    Deterministic for a given seed.
    """
    if math.isinf(target_snr_db) and target_snr_db > 0:
        noisy = DiscreteSignal(signal.samples.copy(), signal.fs)
        return (noisy, np.zeros_like(signal.samples)) if return_noise else noisy

    var_y = float(np.var(signal.samples))
    if var_y <= 0:
        raise ValueError("cannot set an SNR against a constant (zero-variance) signal")
    var_noise = var_y / 10.0 ** (target_snr_db / 10.0)

    rng = np.random.default_rng(seed)
    if signal.is_real:
        raw = rng.standard_normal(signal.n)
    else:
        raw = rng.standard_normal(signal.n) + 1j * rng.standard_normal(signal.n)
    raw_var = float(np.var(raw))
    noise = raw * math.sqrt(var_noise / raw_var)
    noisy = DiscreteSignal(signal.samples + noise, signal.fs)
    return (noisy, noise) if return_noise else noisy


def validate_class(
    specs: Sequence[ComponentSpec],
    duration: float,
    fs: float,
    eps_rate: float,
    d_hz: float,
) -> ClassReport:
    """Report on amplitude/IF smoothness and pairwise IF separation.

    Suprema of ``|A'|`` and ``|phi''|`` are estimated with first
    differences on the sample grid; separation is the minimum over the
    grid of adjacent sorted IFs.  Report-only: never raises on failures.
    """
    n = max(2, int(round(duration * fs)))
    t = np.arange(n) / fs
    dt = 1.0 / fs

    report = ClassReport(eps_rate=eps_rate, d_hz=d_hz)
    if_rows = []
    for spec in specs:
        amp = spec.amplitude_at(t)
        f_inst = spec.if_at(t)
        if_rows.append(f_inst)
        sup_amp = float(np.max(np.abs(np.diff(amp)))) / dt
        sup_if = float(np.max(np.abs(np.diff(f_inst)))) / dt
        report.sup_amp_rate.append(sup_amp)
        report.sup_if_rate.append(sup_if)
        report.amplitude_positive &= bool(np.min(amp) > 0)
        report.if_positive &= bool(np.min(f_inst) > 0)
        report.amp_slowly_varying &= sup_amp <= eps_rate
        report.if_slowly_varying &= sup_if <= eps_rate

    if len(if_rows) >= 2:
        stacked = np.sort(np.vstack(if_rows), axis=0)
        report.min_separation_hz = float(np.min(np.diff(stacked, axis=0)))
    report.well_separated = report.min_separation_hz > d_hz
    return report


_ALLOWED_SHIFTS = (-1, 0, 1, 2)


def shift(signal: DiscreteSignal, offset: int) -> DiscreteSignal:
    """Index shift ``out[l] = in[l + offset]`` with zero fill outside the range.

    Only the offsets used by the reassignment formulas are accepted.
    """
    if offset not in _ALLOWED_SHIFTS:
        raise ValueError(f"offset must be one of {_ALLOWED_SHIFTS}, got {offset}")
    if offset == 0:
        return DiscreteSignal(signal.samples.copy(), signal.fs)
    out = np.zeros_like(signal.samples)
    if offset > 0:
        out[:-offset] = signal.samples[offset:]
    else:
        out[-offset:] = signal.samples[:offset]
    return DiscreteSignal(out, signal.fs)


def crossing_chirps_spec() -> list[ComponentSpec]:
    """Four unit-amplitude crossing linear chirps spanning 5-15 kHz over 5 s."""
    offsets = (5000.0, 8000.0, 12000.0, 15000.0)
    rates = (2000.0, 800.0, -800.0, -2000.0)
    return [ComponentSpec(offset_hz=c, chirp_rate=s) for c, s in zip(offsets, rates)]


CROSSING_CHIRPS_DURATION = 5.0
CROSSING_CHIRPS_FS = 44100.0


def load_signal_spec(source) -> dict:
    """Load a synthesis spec from a JSON file path, file object, or dict.

    Returns a dict with keys ``components`` (list of ComponentSpec),
    ``duration_s``, ``fs_hz``, ``real`` and optional ``snr_db``/``seed``.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)

    comps = []
    for entry in doc.get("components", []):
        comps.append(
            ComponentSpec(
                offset_hz=float(entry.get("offset_hz", 0.0)),
                chirp_rate=float(entry.get("chirp_rate_hz_per_s", entry.get("chirp_rate", 0.0))),
                amplitude=float(entry.get("amplitude", 1.0)),
                phase0_cycles=float(entry.get("phase0_cycles", 0.0)),
                amp_samples=np.asarray(entry["amp_samples"], dtype=float) if "amp_samples" in entry else None,
                phase_samples=np.asarray(entry["phase_samples"], dtype=float) if "phase_samples" in entry else None,
            )
        )
    if not comps:
        raise ValueError("signal spec contains no components")
    return {
        "components": comps,
        "duration_s": float(doc.get("duration_s", CROSSING_CHIRPS_DURATION)),
        "fs_hz": float(doc.get("fs_hz", doc.get("fs", CROSSING_CHIRPS_FS))),
        "real": bool(doc.get("real", True)),
        "snr_db": float(doc["snr_db"]) if "snr_db" in doc and doc["snr_db"] is not None else math.inf,
        "seed": int(doc.get("seed", 0)),
    }
