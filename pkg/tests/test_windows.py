import numpy as np
import pytest

from tfquilt.signals import ComponentSpec, synth_components
from tfquilt.transform import stft
from tfquilt.windows import (
    QuiltedFamily,
    chirp_window,
    cola_check,
    decay_report,
    make_window,
    window_from_json,
    window_to_json,
)


class TestMakeWindow:
    def test_hann4_closed_form(self):
        # 0.5*(1 - cos(2 pi n / 3)) for n = 0..3
        w = make_window("hann", 4, 4, normalize_l1=False)
        np.testing.assert_allclose(w.taps, [0.0, 0.75, 0.75, 0.0], atol=1e-15)

    def test_rect3_l1_normalized(self):
        w = make_window("rect", 3, 3, normalize_l1=True)
        np.testing.assert_allclose(w.taps, [1 / 3] * 3, rtol=1e-15)

    def test_hann_4000_padded_to_4096(self):
        w = make_window("hann", 4000, 4096)
        assert w.fft_size == 4096
        assert np.all(w.taps[4000:] == 0)
        assert np.sum(np.abs(w.taps)) == pytest.approx(1.0, rel=1e-12)
        # symmetric about the native centre
        native = w.taps[:4000]
        np.testing.assert_allclose(native, native[::-1], rtol=1e-12)

    def test_custom_requires_taps(self):
        with pytest.raises(ValueError):
            make_window("custom", 4, 4)

    def test_blackman_endpoints_near_zero(self):
        w = make_window("blackman", 64, 64, normalize_l1=False)
        assert abs(w.taps[0]) < 1e-12
        assert w.taps[32] == pytest.approx(max(w.taps), rel=1e-12)


class TestChirpWindow:
    def test_zero_rate_is_identity(self):
        base = make_window("hann", 64, 64)
        out = chirp_window(base, 0.0, 8000.0)
        np.testing.assert_array_equal(out.taps, base.taps)

    def test_magnitudes_preserved(self):
        base = make_window("hann", 512, 512)
        out = chirp_window(base, 1900.0, 44100.0)
        np.testing.assert_allclose(np.abs(out.taps), np.abs(base.taps), rtol=1e-13, atol=1e-16)

    def test_norms_preserved(self):
        base = make_window("blackman", 200, 256)
        out = chirp_window(base, -750.0, 8000.0)
        assert out.l1_norm() == pytest.approx(base.l1_norm(), rel=1e-13)
        assert out.l2_norm() == pytest.approx(base.l2_norm(), rel=1e-13)

    def test_phase_is_quadratic_about_centre(self):
        fs = 8000.0
        base = make_window("rect", 5, 8, normalize_l1=False)
        out = chirp_window(base, 100.0, fs)
        rel = (np.arange(5) - 2.0) / fs
        expected = np.exp(1j * np.pi * 100.0 * rel**2)
        np.testing.assert_allclose(out.taps[:5], expected, rtol=1e-12)

    def test_matched_chirp_concentrates_transform(self):
        # ridge-band energy fraction of the matched window beats the plain one
        fs = 8000.0
        rate = 600.0
        comp = ComponentSpec(offset_hz=2000.0, chirp_rate=rate)
        sig = synth_components([comp], 1.0, fs)
        base = make_window("hann", 1024, 1024)
        matched = chirp_window(base, rate, fs)
        hop = 128

        def ridge_fraction(win):
            mat = stft(sig, win, hop)
            n = mat.n_frames
            centers = (np.arange(n) * hop + win.fft_size // 2) / fs
            track = comp.if_at(centers)
            e = np.abs(mat.values) ** 2
            k = np.rint(track * win.fft_size / fs).astype(int)
            cols = np.clip(k[:, None] + np.arange(-2, 3)[None, :], 0, mat.n_bins - 1)
            on = e[np.arange(n)[:, None], cols].sum()
            return on / e.sum()

        assert ridge_fraction(matched) > ridge_fraction(base)


class TestDecayReport:
    def test_delta_window_is_flat(self):
        w = make_window("custom", 1, 1, normalize_l1=False, taps=np.array([1.0]))
        rep = decay_report(w, d_hz=100.0, fs=1000.0)
        assert rep.sup_out == pytest.approx(1.0, rel=1e-12)

    def test_rect_sidelobe_matches_dirichlet_oracle(self):
        # closed-form |sum_l e^{-2 pi i u l}| = |sin(pi L u)/sin(pi u)|
        L = 32
        fs = 1000.0
        w = make_window("rect", L, L, normalize_l1=False)
        d = 2 * fs / L  # pass the whole mainlobe
        rep = decay_report(w, d_hz=d, fs=fs, oversample=64)
        u = np.linspace(-0.5, 0.5, 200001)
        with np.errstate(divide="ignore", invalid="ignore"):
            dirichlet = np.abs(np.sin(np.pi * L * u) / np.sin(np.pi * u))
        dirichlet[~np.isfinite(dirichlet)] = L
        outside = np.abs(u * fs) > d / 2
        oracle = dirichlet[outside].max()
        assert rep.sup_out == pytest.approx(oracle, rel=1e-3)
        assert oracle == pytest.approx(0.217 * L, rel=0.03)

    def test_hann_beats_rect(self):
        L = 64
        fs = 1000.0
        d = 4 * fs / L  # hann mainlobe is twice as wide
        hann = decay_report(make_window("hann", L, L), d, fs)
        rect = decay_report(make_window("rect", L, L), d, fs)
        assert hann.sup_out < rect.sup_out

    def test_monotone_in_band(self):
        w = make_window("hann", 48, 64)
        fs = 480.0
        rng = np.random.default_rng(0)
        for _ in range(10):
            d1, d2 = sorted(rng.uniform(5.0, 200.0, size=2))
            r1 = decay_report(w, d1, fs)
            r2 = decay_report(w, d2, fs)
            assert r2.sup_out <= r1.sup_out + 1e-15


class TestColaCheck:
    def test_rect_full_hop(self):
        w = make_window("rect", 16, 16, normalize_l1=False)
        res = cola_check(w, 16)
        assert res["ok"]
        assert res["constant"] == pytest.approx(1.0)

    def test_gaps_fail(self):
        w = make_window("hann", 8, 8)
        assert not cola_check(w, 12)["ok"]

    def test_symmetric_hann_squared_quarter_hop(self):
        # |hann|^2 of period P sums constant at hop P/4; symmetric length P+1
        w = make_window("hann", 513, 1024, normalize_l1=False)
        res = cola_check(w, 128)
        assert res["ok"], res

    def test_hann_512_half_overlap_square_sum_ripples(self):
        # sum of squared half-overlapped hann windows varies by a third:
        # the amplitude half-overlap identity does not carry to |g|^2
        w = make_window("hann", 512, 512, normalize_l1=False)
        res = cola_check(w, 256)
        assert not res["ok"]
        assert res["deviation"] == pytest.approx(1 / 3, abs=0.01)


def test_family_requires_windows_and_shared_hop():
    w = make_window("hann", 8, 8)
    fam = QuiltedFamily(windows=(w,), hop=4)
    assert fam.n_windows == 1
    with pytest.raises(ValueError):
        QuiltedFamily(windows=(), hop=4)
    with pytest.raises(ValueError):
        QuiltedFamily(windows=(w,), hop=0)


def test_window_json_round_trip():
    base = make_window("hann", 100, 128)
    chirped = chirp_window(base, 450.0, 8000.0)
    doc = window_to_json(chirped, fs=8000.0)
    back = window_from_json(doc)
    np.testing.assert_allclose(back.taps, chirped.taps, rtol=0, atol=1e-15)
    assert back.native_length == 100
    assert back.fft_size == 128
    assert back.chirp_rate == 450.0
