"""Adaptive multi-window time-frequency analysis with synchrosqueezing.

Quilted short-time Fourier analysis lets the window vary across
time-frequency regions; entropy minimization over supertiles picks the
window per region, phase-difference reassignment sharpens frequency
tracks, and ridge-guided masked inversion recovers individual modes.
"""

from .signals import (
    ComponentSpec,
    DiscreteSignal,
    add_noise,
    crossing_chirps_spec,
    shift,
    synth_components,
    validate_class,
)
from .windows import (
    QuiltedFamily,
    WindowSpec,
    chirp_window,
    cola_check,
    decay_report,
    make_window,
)
from .transform import (
    QstftResult,
    TFMatrix,
    istft_masked,
    qstft,
    stft,
    stft_freq_shifted,
)
from .reassign import (
    InverseMap,
    ReassignField,
    SstMatrix,
    reassign_freq,
    reassign_freq_2nd,
    reassign_time,
    rm,
    second_order_field,
    squeeze,
    sst,
)
from .adapt import (
    PerturbationSpec,
    SupertileGrid,
    TileAssignment,
    constant_assignment,
    grid_for,
    renyi_entropy,
    select_perturbation_averaged,
    select_single_pass,
)
from .ridge import RidgeCurve, extract_ridge, reconstruct_mode, ridge_energy
from .bench import BenchConfig, BenchResult, run_bench

__version__ = "0.1.0"
