import json
import math

import numpy as np
import pytest

from tfquilt.signals import (
    ComponentSpec,
    DiscreteSignal,
    add_noise,
    crossing_chirps_spec,
    load_signal_spec,
    shift,
    synth_components,
    validate_class,
)


def test_single_complex_chirp_matches_pointwise_oracle():
    # closed form: samples[l] = 2 * exp(2*pi*i*1000*l/8000)
    fs = 8000.0
    sig = synth_components([ComponentSpec(offset_hz=1000.0, amplitude=2.0)], 0.1, fs)
    l = np.arange(sig.n)
    expected = 2.0 * np.exp(2j * np.pi * 1000.0 * l / fs)
    np.testing.assert_allclose(sig.samples, expected, rtol=1e-12, atol=1e-12)


def test_real_synthesis_is_real_part_of_complex():
    specs = crossing_chirps_spec()
    z = synth_components(specs, 0.05, 44100.0)
    r = synth_components(specs, 0.05, 44100.0, real_valued=True)
    assert r.samples.dtype.kind == "f"
    np.testing.assert_array_equal(r.samples, z.samples.real)


def test_crossing_chirps_time_zero_sums_unit_cosines():
    sig = synth_components(crossing_chirps_spec(), 0.05, 44100.0, real_valued=True)
    assert sig.samples[0] == pytest.approx(4.0, abs=1e-12)


def test_if_above_nyquist_rejected_with_component_named():
    bad = [ComponentSpec(offset_hz=100.0), ComponentSpec(offset_hz=3000.0, chirp_rate=4000.0)]
    with pytest.raises(ValueError, match="component 1"):
        synth_components(bad, 1.0, 8000.0)


def test_if_must_stay_positive():
    with pytest.raises(ValueError, match="component 0"):
        synth_components([ComponentSpec(offset_hz=100.0, chirp_rate=-400.0)], 1.0, 8000.0)


class TestAddNoise:
    def test_noise_variance_matches_snr_formula(self):
        # var(noise) = var(y) / 10^(SNR/10); frozen: var 2 at 6 dB -> 0.50238
        fs = 8000.0
        sig = synth_components(
            [ComponentSpec(offset_hz=1000.0), ComponentSpec(offset_hz=2000.0)], 1.0, fs, real_valued=True
        )
        var_y = np.var(sig.samples)
        noisy, noise = add_noise(sig, 6.0, seed=7, return_noise=True)
        assert np.var(noise) == pytest.approx(var_y / 10**0.6, rel=1e-12)
        assert 2.0 / 10**0.6 == pytest.approx(0.502377, rel=1e-5)

    def test_realized_snr_exact_to_1e9_db(self):
        sig = synth_components([ComponentSpec(offset_hz=500.0)], 0.5, 4000.0, real_valued=True)
        for target in (-6.0, 0.0, 13.7):
            _, noise = add_noise(sig, target, seed=3, return_noise=True)
            realized = 10.0 * math.log10(np.var(sig.samples) / np.var(noise))
            assert realized == pytest.approx(target, abs=1e-9)

    def test_same_seed_bit_identical(self):
        sig = synth_components([ComponentSpec(offset_hz=500.0)], 0.5, 4000.0, real_valued=True)
        a = add_noise(sig, 0.0, seed=11)
        b = add_noise(sig, 0.0, seed=11)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_infinite_snr_is_noiseless_sentinel(self):
        sig = synth_components([ComponentSpec(offset_hz=500.0)], 0.1, 4000.0)
        out = add_noise(sig, math.inf, seed=0)
        np.testing.assert_array_equal(out.samples, sig.samples)

    def test_zero_variance_rejected(self):
        flat = DiscreteSignal(np.ones(64), 100.0)
        with pytest.raises(ValueError):
            add_noise(flat, 10.0, seed=0)

    def test_complex_input_gets_complex_noise(self):
        sig = synth_components([ComponentSpec(offset_hz=500.0)], 0.1, 4000.0)
        noisy, noise = add_noise(sig, 3.0, seed=5, return_noise=True)
        assert noise.dtype.kind == "c"
        assert np.var(noise) == pytest.approx(np.var(sig.samples) / 10**0.3, rel=1e-12)


class TestValidateClass:
    def test_crossing_chirps_fail_separation(self):
        rep = validate_class(crossing_chirps_spec(), 5.0, 44100.0, eps_rate=3000.0, d_hz=500.0)
        assert not rep.well_separated
        assert rep.min_separation_hz < 500.0

    def test_two_tones_pass_everything(self):
        specs = [ComponentSpec(offset_hz=100.0), ComponentSpec(offset_hz=200.0)]
        rep = validate_class(specs, 1.0, 8000.0, eps_rate=1.0, d_hz=50.0)
        assert rep.all_ok
        assert max(rep.sup_if_rate) <= 1e-6

    def test_linear_chirp_if_rate_estimate_is_exact(self):
        rep = validate_class([ComponentSpec(offset_hz=1000.0, chirp_rate=800.0)], 1.0, 44100.0, 1e9, 1.0)
        assert rep.sup_if_rate[0] == pytest.approx(800.0, abs=1e-6)

    def test_sinusoidal_amplitude_rate(self):
        # A(t) = 1 + 0.5 sin(2 pi t): A'(t) = pi cos(2 pi t), sup = pi
        spec = ComponentSpec(offset_hz=1000.0, amplitude=lambda t: 1.0 + 0.5 * np.sin(2 * np.pi * t))
        rep = validate_class([spec], 1.0, 8000.0, eps_rate=10.0, d_hz=1.0)
        assert rep.sup_amp_rate[0] == pytest.approx(np.pi, abs=1e-3)


class TestShift:
    def test_round_trip_matches_except_boundary(self):
        sig = synth_components([ComponentSpec(offset_hz=700.0)], 0.05, 8000.0)
        back = shift(shift(sig, +1), -1)
        np.testing.assert_array_equal(back.samples[1:-1], sig.samples[1:-1])
        assert back.samples[0] == 0

    def test_zero_offset_is_identity(self):
        sig = synth_components([ComponentSpec(offset_hz=700.0)], 0.05, 8000.0)
        np.testing.assert_array_equal(shift(sig, 0).samples, sig.samples)

    def test_delta_moves_against_positive_offset(self):
        x = np.zeros(16)
        x[10] = 1.0
        out = shift(DiscreteSignal(x, 10.0), +1)
        assert out.samples[9] == 1.0
        assert out.samples.sum() == 1.0

    def test_disallowed_offset(self):
        sig = DiscreteSignal(np.ones(4), 10.0)
        with pytest.raises(ValueError):
            shift(sig, 3)


def test_signal_spec_json_round_trip(tmp_path):
    doc = {
        "components": [
            {"offset_hz": 5000, "chirp_rate_hz_per_s": 2000, "amplitude": 1.0},
            {"offset_hz": 8000, "chirp_rate_hz_per_s": 800},
        ],
        "duration_s": 0.25,
        "fs_hz": 44100,
        "real": True,
        "snr_db": 4.0,
        "seed": 9,
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    spec = load_signal_spec(path)
    assert len(spec["components"]) == 2
    assert spec["components"][0].chirp_rate == 2000.0
    assert spec["snr_db"] == 4.0
    sig = synth_components(spec["components"], spec["duration_s"], spec["fs_hz"], spec["real"])
    assert sig.n == round(0.25 * 44100)


def test_signal_rejects_nan():
    with pytest.raises(ValueError):
        DiscreteSignal(np.array([1.0, np.nan]), 10.0)
