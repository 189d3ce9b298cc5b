"""Command-line front end: synthesis, analysis, reconstruction, benchmark.

Exit codes: 0 ok, 2 usage/input error, 3 data-format error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io as tfio
from .adapt import PerturbationSpec, grid_for, select_perturbation_averaged, select_single_pass, TileAssignment
from .bench import BenchConfig, run_bench
from .reassign import load_inverse_map, save_inverse_map, sst
from .ridge import extract_ridge, reconstruct_mode, ridge_curve_to_csv
from .signals import ComponentSpec, add_noise, load_signal_spec, synth_components
from .transform import DataFormatError, QstftResult, save_tfmatrix, stft, tfmatrix_from_file
from .windows import QuiltedFamily, chirp_window, make_window, window_from_json, window_to_json
from .signals import shift

_DIR_SETS = {"back": (-1,), "fwd": (1,), "both": (-1, 1)}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, default=None, help="JSON file with parameter defaults (flags override)")
    parser.add_argument("--fs", type=float, default=None)
    parser.add_argument("--hop", type=int, default=250)
    parser.add_argument("--fft-size", type=int, default=4096)
    parser.add_argument("--kbins", type=int, default=None)
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--tile-a", type=int, default=24)
    parser.add_argument("--tile-b", type=int, default=24)
    parser.add_argument("--t-step", type=int, default=4)
    parser.add_argument("--y-step", type=int, default=4)
    parser.add_argument("--t-shift", type=int, default=4)
    parser.add_argument("--y-shift", type=int, default=4)
    parser.add_argument("--dirs", choices=sorted(_DIR_SETS), default="both")
    parser.add_argument("--gamma", type=float, default=0.0)
    parser.add_argument("--snr", type=float, default=None, help="SNR in dB; omit for noiseless")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--algorithm", type=int, choices=(1, 2), default=2)


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Config-file values fill in; explicitly passed flags win."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    passed = {a.split("=")[0].lstrip("-").replace("-", "_") for a in sys.argv if a.startswith("--")}
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in passed:
            setattr(args, attr, value)
    return args


def _family_from_args(args, fs: float) -> QuiltedFamily:
    if getattr(args, "family", None):
        with open(args.family, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "windows" in doc:
            windows = tuple(window_from_json(w) for w in doc["windows"])
        else:
            wdoc = doc.get("window", {})
            base = make_window(
                wdoc.get("kind", "hann"),
                int(wdoc.get("native_length", 4000)),
                int(wdoc.get("fft_size", args.fft_size)),
            )
            sigmas = doc.get("sigmas", [0.0])
            windows = tuple(chirp_window(base, float(s), fs) for s in sigmas)
        return QuiltedFamily(windows=windows, hop=int(doc.get("hop", args.hop)))
    base = make_window("hann", min(4000, args.fft_size), args.fft_size)
    return QuiltedFamily(windows=(base,), hop=args.hop)


def cmd_synth(args) -> int:
    spec = load_signal_spec(args.spec)
    snr = args.snr if args.snr is not None else spec.get("snr_db", math.inf)
    seed = args.seed if args.seed is not None else spec.get("seed", 0)
    signal = synth_components(
        spec["components"], spec["duration_s"], spec["fs_hz"], real_valued=spec["real"]
    )
    noiseless = snr is None or math.isinf(float(snr))
    if not noiseless:
        signal = add_noise(signal, float(snr), int(seed))
    out = Path(args.out)
    tfio.write_wav(out, signal)

    hop = args.hop
    n_frames = 1 + (signal.n - 1) // hop
    times = np.arange(n_frames) * hop / signal.fs
    sidecar = {
        "fs_hz": signal.fs,
        "duration_s": spec["duration_s"],
        "hop": hop,
        "snr_db": None if noiseless else float(snr),
        "seed": int(seed),
        "components": [
            {
                "offset_hz": c.offset_hz,
                "chirp_rate_hz_per_s": c.chirp_rate,
                "amplitude": c.amplitude if not callable(c.amplitude) else None,
            }
            for c in spec["components"]
        ],
        "if_hz": [[float(v) for v in c.if_at(times)] for c in spec["components"]],
        "frame_times_s": [float(v) for v in times],
    }
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=1), encoding="utf-8")
    print(f"wrote {out} and {out.with_suffix('.json')}")
    return 0


def cmd_analyze(args) -> int:
    signal = tfio.read_wav(args.wav)
    fs = args.fs if args.fs else signal.fs
    family = _family_from_args(args, fs)
    hop = family.hop
    kbins = args.kbins if args.kbins else 4 * family.max_fft_size

    n = None
    mats = []
    for w in family.windows:
        m = stft(signal, w, hop, n_frames_override=n)
        n = m.n_frames
        mats.append(m)
    grid = grid_for(family, n, signal.fs, args.tile_a, args.tile_b)
    pert = PerturbationSpec(
        t_step=args.t_step, y_step=args.y_step, t_shift=args.t_shift, y_shift=args.y_shift,
        dirs_t=_DIR_SETS[args.dirs], dirs_y=_DIR_SETS[args.dirs],
    )
    if args.algorithm == 1:
        assignment = select_single_pass(mats, grid, args.alpha)
    else:
        assignment = select_perturbation_averaged(mats, grid, args.alpha, pert)

    advanced = shift(signal, +1)
    mats_adv = [stft(advanced, w, hop, n_frames_override=n) for w in family.windows]
    q0 = QstftResult(per_window=mats, family=family, assignment=assignment)
    q1 = QstftResult(per_window=mats_adv, family=family, assignment=assignment)
    smat, invmap = sst(q0, q1, args.gamma, kbins, mode="magnitude", build_inverse_map=True)

    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for w, mat in enumerate(mats):
        save_tfmatrix(f"{prefix}_stft_w{w}.tfm", mat)
    save_tfmatrix(f"{prefix}_sst.tfm", smat)
    save_inverse_map(f"{prefix}_invmap.tfm", invmap, fs=signal.fs, hop=hop)
    Path(f"{prefix}_assign.json").write_text(
        json.dumps(assignment.to_json(), indent=1), encoding="utf-8"
    )
    max_bin = kbins // 2  # display the physical band [0, fs/2)
    tfio.write_pgm(f"{prefix}_sst.pgm", tfio.log_energy_image(smat.values, max_bin))
    index_img = assignment.window_index_image(n, max_bin, kbins)
    tfio.write_pgm(f"{prefix}_windows.pgm", tfio.index_image(index_img, family.n_windows))
    meta = {
        "fs": signal.fs,
        "hop": hop,
        "kbins": kbins,
        "gamma": args.gamma,
        "n_frames": n,
        "windows": [window_to_json(w, fs=signal.fs) for w in family.windows],
    }
    Path(f"{prefix}_meta.json").write_text(json.dumps(meta), encoding="utf-8")
    print(f"wrote analysis files under prefix {prefix}")
    return 0


def cmd_reconstruct(args) -> int:
    if args.modes == 0:
        return 0
    prefix = Path(args.prefix)
    meta = json.loads(Path(f"{prefix}_meta.json").read_text(encoding="utf-8"))
    windows = tuple(window_from_json(doc) for doc in meta["windows"])
    family = QuiltedFamily(windows=windows, hop=int(meta["hop"]))
    assignment = TileAssignment.from_json(
        json.loads(Path(f"{prefix}_assign.json").read_text(encoding="utf-8"))
    )
    mats = [tfmatrix_from_file(f"{prefix}_stft_w{w}.tfm") for w in range(len(windows))]
    smat = tfmatrix_from_file(f"{prefix}_sst.tfm")
    from .reassign import SstMatrix

    energy = SstMatrix(
        values=smat.values, kbins=smat.fft_size, hop=smat.hop, fs=smat.fs,
        kind="magnitude-sum",
    )
    invmap = load_inverse_map(f"{prefix}_invmap.tfm")
    analysis = QstftResult(per_window=mats, family=family, assignment=assignment)

    curves, exhausted = extract_ridge(energy, args.modes, jump_max=args.jump_max, min_energy=args.min_energy)
    if exhausted and len(curves) < args.modes:
        print(f"warning: found only {len(curves)} of {args.modes} requested ridges", file=sys.stderr)
    out_base = Path(args.out)
    for i, curve in enumerate(curves):
        mode = reconstruct_mode(analysis, invmap, curve, halo=args.halo, real_output=not args.complex_modes)
        tfio.write_wav(f"{out_base}_mode{i + 1}.wav", mode.signal)
        ridge_curve_to_csv(f"{out_base}_mode{i + 1}.csv", curve, energy.fs, energy.hop, energy.kbins)
        if mode.straddled_frames:
            print(f"mode {i + 1}: {mode.straddled_frames} frames straddled a tile boundary", file=sys.stderr)
    print(f"wrote {len(curves)} mode WAVs under {out_base}")
    return 0


def cmd_bench(args) -> int:
    cfg = BenchConfig()
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "components" in doc:
            cfg.components = [
                ComponentSpec(
                    offset_hz=float(c["offset_hz"]),
                    chirp_rate=float(c.get("chirp_rate_hz_per_s", c.get("chirp_rate", 0.0))),
                    amplitude=float(c.get("amplitude", 1.0)),
                )
                for c in doc["components"]
            ]
        for key in (
            "duration_s", "fs", "snr_db", "seeds", "methods", "window_kind", "window_native",
            "window_fft", "sigmas", "hop", "kbins", "gamma", "alpha", "tile_frames",
            "tile_bins", "selection_algorithm", "band", "q",
        ):
            if key in doc:
                value = doc[key]
                setattr(cfg, key, tuple(value) if isinstance(value, list) else value)
        if "pert" in doc:
            p = doc["pert"]
            cfg.pert = PerturbationSpec(
                t_step=int(p.get("t_step", 4)), y_step=int(p.get("y_step", 4)),
                t_shift=int(p.get("t_shift", 4)), y_shift=int(p.get("y_shift", 4)),
                dirs_t=_DIR_SETS[p.get("dirs", "both")], dirs_y=_DIR_SETS[p.get("dirs", "both")],
            )
    cfg.validate()
    result = run_bench(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.to_csv(out_dir / "ridge_energy.csv")
    text = result.to_text()
    (out_dir / "ridge_energy.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfquilt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a component signal to WAV")
    p.add_argument("spec", help="JSON component spec")
    p.add_argument("out", help="output WAV path")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="quilted analysis of a WAV file")
    p.add_argument("wav", help="input WAV")
    p.add_argument("out_prefix", help="output file prefix")
    p.add_argument("--family", type=str, default=None, help="JSON window family spec")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reconstruct", help="extract ridges and rebuild modes")
    p.add_argument("prefix", help="analysis output prefix")
    p.add_argument("out", help="output WAV base name")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--halo", type=int, default=4)
    p.add_argument("--jump-max", type=int, default=8)
    p.add_argument("--min-energy", type=float, default=0.05)
    p.add_argument("--complex-modes", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("bench", help="ridge-concentration method comparison")
    p.add_argument("out", help="output directory")
    p.add_argument("--config", type=str, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, IsADirectoryError, PermissionError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
