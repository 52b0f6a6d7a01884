import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import lfilter

from herdsig import dsp
from herdsig.errors import NonPowerOfTwoSize, TooManyFilters, ZeroEnergyFrame

finite = st.floats(-1, 1, allow_nan=False, allow_infinity=False)


def naive_dft(x, n):
    k = np.arange(n // 2 + 1)[:, None]
    m = np.arange(len(x))[None, :]
    return (np.exp(-2j * np.pi * k * m / n) @ x)


def naive_dct(v):
    n = len(v)
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.cos(np.pi * (m + 0.5) * k / n)
    scale = np.full(n, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    return scale * (basis @ v)


def test_impulse_spectrum_is_flat():
    x = np.zeros(64)
    x[0] = 1.0
    spec = dsp.fft_magnitude(x, 64)
    assert len(spec.magnitudes) == 33
    assert np.allclose(spec.magnitudes, 1.0)


def test_cosine_on_bin():
    n, k = 128, 9
    x = np.cos(2 * np.pi * k * np.arange(n) / n)
    mags = dsp.fft_magnitude(x, n).magnitudes
    assert mags[k] == pytest.approx(n / 2)
    assert np.max(np.delete(mags, k)) < 1e-9


def test_fft_size_must_be_power_of_two():
    with pytest.raises(NonPowerOfTwoSize):
        dsp.fft_magnitude(np.ones(10), 100)


def test_spectrum_against_naive_dft(rng):
    x = rng.standard_normal(100)
    assert np.allclose(dsp.fft_magnitude(x, 128).magnitudes, np.abs(naive_dft(x, 128)),
                       atol=1e-10)


def test_spectrum_bin_width():
    spec = dsp.fft_magnitude(np.ones(8), 1024, sample_rate=16000)
    assert spec.bin_hz == 16000 / 1024
    assert spec.frequencies[2] == 2 * 16000 / 1024


@given(st.lists(finite, min_size=1, max_size=256), st.sampled_from([256, 512]))
def test_parseval(values, n):
    x = np.asarray(values)
    mags = dsp.fft_magnitude(x, n).magnitudes
    # full spectrum energy from the one-sided half
    full = mags[0] ** 2 + mags[-1] ** 2 + 2 * np.sum(mags[1:-1] ** 2)
    energy = np.sum(x * x)
    assert abs(full / n - energy) <= 1e-9 * max(energy, 1e-300)


def test_analysis_fft_size():
    assert dsp.analysis_fft_size(400) == 1024
    assert dsp.analysis_fft_size(512) == 1024


def test_autocorrelation_of_constant():
    L = 50
    r = dsp.autocorrelate(np.full(L, 0.3))
    assert np.allclose(r, 1 - np.arange(L) / L)


def test_autocorrelation_sine_period():
    P = 37
    x = np.sin(2 * np.pi * np.arange(1000) / P)
    r = dsp.autocorrelate(x)
    lag = P // 2 + int(np.argmax(r[P // 2:]))
    assert abs(lag - P) <= 1


def test_autocorrelation_white_noise():
    for seed in range(20):
        r = dsp.autocorrelate(np.random.default_rng(seed).standard_normal(4096))
        assert np.max(np.abs(r[1:])) < 0.1


def test_autocorrelation_zero_energy():
    with pytest.raises(ZeroEnergyFrame):
        dsp.autocorrelate(np.zeros(16))


@given(st.lists(finite, min_size=2, max_size=120).filter(lambda v: any(abs(a) > 1e-6 for a in v)))
def test_autocorrelation_bounds(values):
    r = dsp.autocorrelate(values)
    assert r[0] == 1.0
    assert np.all(np.abs(r) <= 1.0)


def test_windowed_autocorrelation_undoes_window_taper():
    W = 960
    P = 80
    x = np.sin(2 * np.pi * np.arange(W) / P)
    r = dsp.windowed_autocorrelation(x[None, :], np.hanning(W))[0]
    assert r[P] == pytest.approx(1.0, abs=0.02)


def test_lpc_recovers_ar2(rng):
    e = rng.standard_normal(8192)
    x = lfilter([1.0], [1.0, -1.3, 0.6], e)
    model = dsp.lpc(x, 2)
    assert model.coefficients[0] == pytest.approx(1.3, rel=0.05)
    assert model.coefficients[1] == pytest.approx(-0.6, rel=0.05)


def test_lpc_order_zero_is_mean_power(rng):
    x = rng.standard_normal(300)
    model = dsp.lpc(x, 0)
    assert model.coefficients.size == 0
    assert model.gain ** 2 == pytest.approx(np.mean(x * x))


def test_lpc_impulse_poles_inside_unit_circle():
    x = np.zeros(64)
    x[0] = 1.0
    model = dsp.lpc(x, 2)
    assert np.all(np.abs(model.poles()) < 1.0)


@given(st.lists(finite, min_size=40, max_size=200).filter(lambda v: np.std(v) > 1e-3),
       st.integers(1, 12))
def test_lpc_stable_and_error_non_increasing(values, order):
    model = dsp.lpc(values, order)
    assert np.all(np.diff(model.errors) <= 1e-12 * model.errors[0])
    if model.order:
        assert np.all(np.abs(model.poles()) < 1.0 + 1e-9)


def test_levinson_truncates_on_invalid_autocorrelation():
    model = dsp.levinson_durbin([1.0, 1.0, 1.0], 2)
    assert model.truncated
    assert model.order < 2


def test_lpc_batch_matches_single(rng):
    frames = rng.standard_normal((5, 200))
    a, ok = dsp.lpc_batch(frames, 10)
    assert ok.all()
    for row, coeffs in zip(frames, a):
        assert np.allclose(coeffs, dsp.lpc(row, 10).coefficients, atol=1e-10)


def test_polynomial_roots_accuracy(rng):
    roots = rng.uniform(0.2, 0.9, 24) * np.exp(1j * rng.uniform(0, np.pi, 24))
    roots = np.r_[roots[:12], np.conj(roots[:12])]
    found = dsp.polynomial_roots(np.poly(roots).real)
    for r in roots:
        assert np.min(np.abs(found - r)) < 1e-6


def test_mel_formula():
    assert float(dsp.hz_to_mel(700.0)) == pytest.approx(2595 * np.log10(2))
    assert float(dsp.hz_to_mel(700.0)) == pytest.approx(781.17, abs=0.01)
    assert float(dsp.mel_to_hz(dsp.hz_to_mel(1234.5))) == pytest.approx(1234.5)


def test_mel_filterbank_construction():
    fb = dsp.mel_filterbank(26, 1024, 16000)
    assert fb.shape == (26, 513)
    assert np.all(fb >= 0)
    assert np.all(fb.sum(axis=1) > 0)
    peaks = fb.argmax(axis=1)
    assert all(np.sum(row == row.max()) == 1 for row in fb)
    assert np.all(np.diff(peaks) > 0)
    cover = fb.sum(axis=0)
    assert np.all(cover <= 2.0)
    assert np.all(cover[peaks[0]:peaks[-1] + 1] > 0)


def test_mel_filterbank_collision():
    with pytest.raises(TooManyFilters):
        dsp.mel_filterbank(60, 64, 16000)


def test_dct_examples():
    c = dsp.dct_ii(np.full(10, 2.0), 10)
    assert c[0] == pytest.approx(2.0 * np.sqrt(10))
    assert np.allclose(c[1:], 0.0, atol=1e-12)
    n = 16
    D = np.column_stack([naive_dct(e) for e in np.eye(n)])
    for k in (0, 3, 15):
        assert np.allclose(dsp.dct_ii(D[k]), np.eye(n)[k], atol=1e-12)


@given(st.lists(finite, min_size=1, max_size=64))
def test_dct_matches_naive_and_conserves_energy(values):
    v = np.asarray(values)
    c = dsp.dct_ii(v)
    assert np.allclose(c, naive_dct(v), atol=1e-12)
    energy = np.sum(v * v)
    assert abs(np.sum(c * c) - energy) <= 1e-9 * max(energy, 1e-300)


def test_primitives_are_pure(rng):
    x = rng.standard_normal(256)
    assert np.array_equal(dsp.fft_magnitude(x, 512).magnitudes,
                          dsp.fft_magnitude(x.copy(), 512).magnitudes)
    assert np.array_equal(dsp.autocorrelate(x), dsp.autocorrelate(x.copy()))
    assert np.array_equal(dsp.lpc(x, 8).coefficients, dsp.lpc(x.copy(), 8).coefficients)
    assert np.array_equal(dsp.dct_ii(x, 13), dsp.dct_ii(x.copy(), 13))


def test_harmonic_peaks_find_harmonics():
    sr, f0 = 16000, 250.0
    t = np.arange(400) / sr
    x = sum(np.cos(2 * np.pi * k * f0 * t) / k for k in range(1, 20))
    omega, power, mask = dsp.harmonic_peaks(x[None, :] * np.hanning(400), np.array([f0]), sr)
    found = omega[0][mask[0]] * sr / (2 * np.pi)
    assert np.allclose(found[:5], f0 * np.arange(1, 6), rtol=0.01)


def test_discrete_all_pole_recovers_resonance():
    sr, f0 = 16000, 300.0
    pole = 0.97 * np.exp(2j * np.pi * 900 / sr)
    c = np.poly([pole, np.conj(pole)]).real
    w = 2 * np.pi * np.arange(1, 26) * f0 / sr
    A = c[0] + c[1] * np.exp(-1j * w) + c[2] * np.exp(-2j * w)
    power = 1.0 / np.abs(A) ** 2
    coeffs = dsp.discrete_all_pole(w[None, :], power[None, :], np.ones((1, len(w)), bool), 2)
    poles = np.roots(np.r_[1.0, -coeffs[0]])
    assert np.abs(np.angle(poles[0])) * sr / (2 * np.pi) == pytest.approx(900, rel=0.05)
