import numpy as np
import pytest

from tfquilt.adapt import constant_assignment, grid_for
from tfquilt.signals import ComponentSpec, DiscreteSignal, synth_components
from tfquilt.transform import (
    DataFormatError,
    QstftResult,
    TFMatrix,
    interior_range,
    istft_masked,
    load_tfmatrix,
    num_frames,
    qstft,
    save_tfmatrix,
    stft,
    stft_freq_shifted,
    tfmatrix_from_file,
)
from tfquilt.windows import QuiltedFamily, make_window


def brute_stft(samples, taps, hop, n, freq_shift=0.0):
    """Direct summation oracle for the windowed hopped DFT."""
    L = taps.size
    out = np.zeros((n, L), dtype=complex)
    for fr in range(n):
        for k in range(L):
            acc = 0.0 + 0.0j
            for l in range(L):
                idx = l + fr * hop
                x = samples[idx] if idx < samples.size else 0.0
                acc += x * np.conj(taps[l]) * np.exp(-2j * np.pi * l * (k / L + freq_shift))
            out[fr, k] = acc
    return out


@pytest.fixture(scope="module")
def random_signal():
    rng = np.random.default_rng(42)
    samples = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    return DiscreteSignal(samples, 256.0)


def test_num_frames_covers_signal_tail():
    # minimal N with the signal vanishing at/after the last frame's end
    assert num_frames(220500, 4096, 250) == 867
    assert num_frames(100, 128, 32) == 1
    assert num_frames(129, 128, 32) == 2


def test_zero_signal_gives_zero_matrix():
    sig = DiscreteSignal(np.zeros(300), 100.0)
    mat = stft(sig, make_window("hann", 64, 64), 16)
    assert not np.any(mat.values)


def test_delta_signal_closed_form():
    # V[n,k] = conj(g[l0-nH]) e^{-2 pi i k (l0-nH)/L} while the delta is in range
    fs = 100.0
    l0 = 40
    x = np.zeros(128)
    x[l0] = 1.0
    sig = DiscreteSignal(x, fs)
    w = make_window("hann", 32, 32, normalize_l1=False)
    hop = 8
    mat = stft(sig, w, hop)
    k = np.arange(32)
    for n in range(mat.n_frames):
        rel = l0 - n * hop
        if 0 <= rel < 32:
            expected = np.conj(w.taps[rel]) * np.exp(-2j * np.pi * k * rel / 32)
        else:
            expected = np.zeros(32, dtype=complex)
        np.testing.assert_allclose(mat.values[n], expected, atol=1e-12)


def test_fft_path_matches_brute_force(random_signal):
    w = make_window("hann", 48, 64)
    hop = 16
    mat = stft(random_signal, w, hop)
    oracle = brute_stft(random_signal.samples, w.taps, hop, mat.n_frames)
    assert np.max(np.abs(mat.values - oracle)) < 1e-9


def test_freq_shifted_matches_brute_force(random_signal):
    w = make_window("blackman", 40, 64)
    hop = 16
    mat = stft_freq_shifted(random_signal, w, hop)
    oracle = brute_stft(random_signal.samples, w.taps, hop, mat.n_frames, freq_shift=random_signal.dt)
    assert np.max(np.abs(mat.values - oracle)) < 1e-9


def test_freq_shifted_delta_ratio_is_bin_independent():
    fs = 100.0
    l0 = 20
    x = np.zeros(64)
    x[l0] = 1.0
    sig = DiscreteSignal(x, fs)
    w = make_window("rect", 16, 16, normalize_l1=False)
    hop = 4
    v = stft(sig, w, hop)
    vp = stft_freq_shifted(sig, w, hop)
    for n in range(v.n_frames):
        rel = l0 - n * hop
        if 0 <= rel < 16:
            ratio = vp.values[n] / v.values[n]
            np.testing.assert_allclose(ratio, np.exp(-2j * np.pi * rel / fs), rtol=1e-10)


def test_per_frame_parseval(random_signal):
    w = make_window("hann", 48, 64)
    hop = 16
    mat = stft(random_signal, w, hop)
    L = 64
    padded = np.zeros((mat.n_frames - 1) * hop + L, dtype=complex)
    padded[: random_signal.n] = random_signal.samples
    for n in range(mat.n_frames):
        frame = padded[n * hop : n * hop + L] * np.conj(w.taps)
        lhs = np.sum(np.abs(mat.values[n]) ** 2)
        rhs = L * np.sum(np.abs(frame) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-9)


def test_linearity(random_signal):
    rng = np.random.default_rng(1)
    other = DiscreteSignal(rng.standard_normal(256) * 1j + rng.standard_normal(256), 256.0)
    w = make_window("hann", 32, 32)
    a = 0.7 - 0.2j
    combo = DiscreteSignal(a * random_signal.samples + other.samples, 256.0)
    lhs = stft(combo, w, 8).values
    rhs = a * stft(random_signal, w, 8).values + stft(other, w, 8).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_modulation_covariance_when_frames_align():
    # multiplying by e^{2 pi i k0 l / L} rotates each aligned frame's spectrum
    rng = np.random.default_rng(2)
    L = 32
    sig = DiscreteSignal(rng.standard_normal(4 * L) + 0j, float(L))
    w = make_window("hann", L, L)
    k0 = 5
    mod = DiscreteSignal(sig.samples * np.exp(2j * np.pi * k0 * np.arange(sig.n) / L), float(L))
    base = stft(sig, w, L).values
    shifted = stft(mod, w, L).values
    np.testing.assert_allclose(np.roll(base, k0, axis=1), shifted, atol=1e-9)


class TestIstft:
    def test_full_mask_identity_on_interior(self):
        rng = np.random.default_rng(3)
        sig = DiscreteSignal(rng.standard_normal(4000) + 1j * rng.standard_normal(4000), 8000.0)
        w = make_window("hann", 512, 512)
        hop = 256
        mat = stft(sig, w, hop)
        rec = istft_masked(mat, np.ones(mat.values.shape, bool), w, hop)
        lo, hi = interior_range(512, hop, mat.n_frames)
        hi = min(hi, sig.n - 1)
        err = np.linalg.norm(rec.samples[lo : hi + 1] - sig.samples[lo : hi + 1])
        assert err / np.linalg.norm(sig.samples[lo : hi + 1]) < 1e-10

    def test_empty_mask_gives_zeros(self):
        sig = DiscreteSignal(np.random.default_rng(0).standard_normal(1000), 1000.0)
        w = make_window("hann", 128, 128)
        mat = stft(sig, w, 32)
        rec = istft_masked(mat, np.zeros(mat.values.shape, bool), w, 32)
        assert not np.any(rec.samples)

    def test_tone_mask_few_bins(self):
        fs = 8000.0
        L = 512
        k_tone = 64  # exactly on a bin
        sig = synth_components([ComponentSpec(offset_hz=k_tone * fs / L)], 0.5, fs)
        w = make_window("hann", L, L)
        hop = 128
        mat = stft(sig, w, hop)
        mask = np.zeros(mat.values.shape, bool)
        mask[:, k_tone - 2 : k_tone + 3] = True
        rec = istft_masked(mat, mask, w, hop)
        lo, hi = interior_range(L, hop, mat.n_frames)
        hi = min(hi, sig.n - 1)
        err = np.linalg.norm(rec.samples[lo : hi + 1] - sig.samples[lo : hi + 1])
        assert err / np.linalg.norm(sig.samples[lo : hi + 1]) < 1e-3

    def test_zero_coverage_raises_with_range(self):
        sig = DiscreteSignal(np.ones(400), 100.0)
        w = make_window("hann", 32, 32)
        mat = stft(sig, w, 48)  # hop > window: coverage gaps
        with pytest.raises(ValueError, match="zero window coverage"):
            istft_masked(mat, np.ones(mat.values.shape, bool), w, 48)

    def test_real_output_doubles_real_part(self):
        sig = synth_components([ComponentSpec(offset_hz=1000.0)], 0.25, 8000.0)
        w = make_window("hann", 256, 256)
        mat = stft(sig, w, 64)
        mask = np.ones(mat.values.shape, bool)
        cplx = istft_masked(mat, mask, w, 64)
        real = istft_masked(mat, mask, w, 64, real_output=True)
        np.testing.assert_allclose(real.samples, 2.0 * cplx.samples.real, atol=1e-12)


class TestQstft:
    def _family(self, fs=8000.0):
        w1 = make_window("hann", 128, 128)
        w2 = make_window("hann", 32, 32)
        return QuiltedFamily(windows=(w1, w2), hop=16)

    def test_single_window_family_equals_stft(self):
        sig = synth_components([ComponentSpec(offset_hz=900.0)], 0.2, 8000.0)
        w = make_window("hann", 64, 64)
        fam = QuiltedFamily(windows=(w,), hop=16)
        n = num_frames(sig.n, 64, 16)
        grid = grid_for(fam, n, sig.fs, 4, 4)
        res = qstft(sig, fam, constant_assignment(grid, 1, 0))
        ref = stft(sig, w, 16)
        np.testing.assert_array_equal(res.per_window[0].values, ref.values)
        assert res.active_mask(0).all()

    def test_constant_assignment_second_window(self):
        sig = synth_components([ComponentSpec(offset_hz=900.0)], 0.2, 8000.0)
        fam = self._family()
        n = max(num_frames(sig.n, w.fft_size, fam.hop) for w in fam.windows)
        grid = grid_for(fam, n, sig.fs, 4, 4)
        res = qstft(sig, fam, constant_assignment(grid, 2, 1))
        ref = stft(sig, fam.windows[1], fam.hop, n_frames_override=n)
        np.testing.assert_array_equal(res.active_values(1), ref.values)
        assert not res.active_mask(0).any()

    def test_qstft_matches_brute_force_with_mixed_assignment(self):
        rng = np.random.default_rng(9)
        sig = DiscreteSignal(rng.standard_normal(256) + 1j * rng.standard_normal(256), 256.0)
        w1 = make_window("hann", 48, 64)
        w2 = make_window("rect", 16, 32, normalize_l1=True)
        fam = QuiltedFamily(windows=(w1, w2), hop=16)
        n = max(num_frames(sig.n, w.fft_size, 16) for w in fam.windows)
        grid = grid_for(fam, n, sig.fs, 3, 4)
        assignment = constant_assignment(grid, 2, 0)
        rng2 = np.random.default_rng(5)
        assignment.winner[:] = rng2.integers(0, 2, size=assignment.winner.shape)
        res = qstft(sig, fam, assignment)
        for w_idx, win in enumerate(fam.windows):
            oracle = brute_stft(sig.samples, win.taps, 16, n)
            active = res.active_mask(w_idx)
            got = res.per_window[w_idx].values
            assert np.max(np.abs((got - oracle)[active])) < 1e-9
        a0 = res.active_mask(0)
        a1 = res.active_mask(1)
        assert a0.shape == (n, 64) and a1.shape == (n, 32)

    def test_unknown_window_index_rejected(self):
        fam = self._family()
        sig = synth_components([ComponentSpec(offset_hz=900.0)], 0.1, 8000.0)
        n = max(num_frames(sig.n, w.fft_size, fam.hop) for w in fam.windows)
        grid = grid_for(fam, n, sig.fs, 4, 4)
        bad = constant_assignment(grid, 3, 2)  # three windows claimed, family has two
        with pytest.raises(ValueError):
            qstft(sig, fam, bad)


class TestSerialization:
    def test_round_trip_complex(self, tmp_path):
        rng = np.random.default_rng(7)
        sig = DiscreteSignal(rng.standard_normal(500), 1000.0)
        mat = stft(sig, make_window("hann", 64, 64), 16)
        path = tmp_path / "m.tfm"
        save_tfmatrix(path, mat)
        back = tfmatrix_from_file(path)
        np.testing.assert_array_equal(back.values, mat.values)
        assert back.hop == 16 and back.fft_size == 64 and back.fs == 1000.0

    def test_round_trip_real(self, tmp_path):
        mat = TFMatrix(values=np.arange(12.0).reshape(3, 4), fft_size=4, hop=2, fs=10.0, kind="real-energy")
        path = tmp_path / "r.tfm"
        save_tfmatrix(path, mat)
        values, header = load_tfmatrix(path)
        np.testing.assert_array_equal(values, mat.values)
        assert header["dtype"] == "f64"

    def test_corrupt_magic_raises_data_format_error(self, tmp_path):
        path = tmp_path / "bad.tfm"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(DataFormatError):
            load_tfmatrix(path)

    def test_truncated_payload(self, tmp_path):
        mat = TFMatrix(values=np.ones((4, 4)), fft_size=4, hop=1, fs=1.0, kind="real-energy")
        path = tmp_path / "t.tfm"
        save_tfmatrix(path, mat)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(DataFormatError):
            load_tfmatrix(path)
