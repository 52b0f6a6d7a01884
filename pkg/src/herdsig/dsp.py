"""Numeric primitives shared by the feature extractors.

All functions are pure: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import NonPowerOfTwoSize, TooManyFilters, ZeroEnergyFrame


@dataclass(frozen=True)
class Spectrum:
    magnitudes: np.ndarray
    bin_hz: float

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(len(self.magnitudes)) * self.bin_hz


@dataclass(frozen=True)
class LpcModel:
    """All-pole model ``x[n] ~ sum_k a_k x[n-k]`` with residual power ``gain**2``.

    ``truncated`` is set when the recursion met a reflection coefficient of
    magnitude >= 1 and the model was cut back to the last stable order.
    """

    coefficients: np.ndarray
    gain: float
    order: int
    reflection: np.ndarray
    errors: np.ndarray
    truncated: bool = False

    @property
    def polynomial(self) -> np.ndarray:
        """Denominator ``1 - a_1 z^-1 - ... - a_p z^-p`` of the synthesis filter."""
        return np.concatenate(([1.0], -np.asarray(self.coefficients)))

    def poles(self) -> np.ndarray:
        if self.order == 0:
            return np.zeros(0, dtype=complex)
        return polynomial_roots(self.polynomial)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def analysis_fft_size(frame_len: int) -> int:
    """Smallest power of two holding twice the frame (2x zero padding)."""
    return next_pow2(2 * frame_len)


def fft_magnitude(frame, fft_size: int, sample_rate: float = 1.0) -> Spectrum:
    frame = np.asarray(frame, dtype=np.float64)
    if not is_power_of_two(fft_size):
        raise NonPowerOfTwoSize(f"fft_size {fft_size} is not a power of two")
    if len(frame) > fft_size:
        raise ValueError("frame longer than fft_size")
    mags = np.abs(np.fft.rfft(frame, n=fft_size))
    return Spectrum(mags, sample_rate / fft_size)


def power_spectra(frames: np.ndarray, fft_size: int) -> np.ndarray:
    """|rfft|^2 of every row of ``frames``."""
    if not is_power_of_two(fft_size):
        raise NonPowerOfTwoSize(f"fft_size {fft_size} is not a power of two")
    X = np.fft.rfft(np.asarray(frames, dtype=np.float64), n=fft_size, axis=-1)
    return X.real ** 2 + X.imag ** 2


def _raw_autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Unnormalized lag products sum_n x[n] x[n+k] along the last axis, k <= max_lag."""
    L = x.shape[-1]
    max_lag = L - 1 if max_lag is None else min(max_lag, L - 1)
    n = sp_fft.next_fast_len(L + max_lag, real=True)
    X = sp_fft.rfft(x, n=n, axis=-1)
    return sp_fft.irfft(X.real ** 2 + X.imag ** 2, n=n, axis=-1)[..., : max_lag + 1]


def autocorrelate(frame) -> np.ndarray:
    """Biased autocorrelation normalized so that ``r[0] == 1``."""
    x = np.asarray(frame, dtype=np.float64)
    r = _raw_autocorrelation(x)
    if not r[0] > 0.0:
        raise ZeroEnergyFrame("autocorrelation of a zero-energy frame")
    r = r / r[0]
    r[0] = 1.0
    return np.clip(r, -1.0, 1.0)


def windowed_autocorrelation(frames: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Window-corrected normalized autocorrelation, one row per frame.

    Each windowed frame's normalized autocorrelation is divided by that of the
    window itself, which removes the taper a finite window imposes on long
    lags. Valid up to half the window length; rows with zero energy are NaN.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    W = frames.shape[-1]
    half = W // 2
    ra = _raw_autocorrelation(frames * window[None, :], half)
    rw = _raw_autocorrelation(window, half)
    e0 = ra[:, :1]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (ra / e0) / (rw / rw[0])[None, :]
    r[(e0[:, 0] <= 0.0)] = np.nan
    return r


def levinson_durbin(r, order: int) -> LpcModel:
    """Solve the Yule-Walker equations for autocorrelation ``r[0..order]``."""
    r = np.asarray(r, dtype=np.float64)
    if order < 0:
        raise ValueError("order must be non-negative")
    if len(r) < order + 1:
        raise ValueError("need order + 1 autocorrelation lags")
    a = np.zeros(0)
    err = float(r[0])
    errors = [err]
    ks = []
    truncated = False
    for i in range(1, order + 1):
        if err <= 0.0:
            truncated = True
            break
        acc = r[i] - np.dot(a, r[i - 1:0:-1])
        k = acc / err
        if not abs(k) < 1.0:
            truncated = True
            break
        a = np.concatenate((a - k * a[::-1], [k]))
        err = err * (1.0 - k * k)
        ks.append(k)
        errors.append(err)
    return LpcModel(
        coefficients=a,
        gain=float(np.sqrt(max(err, 0.0))),
        order=len(a),
        reflection=np.asarray(ks),
        errors=np.asarray(errors),
        truncated=truncated,
    )


def lpc(frame, order: int) -> LpcModel:
    """Autocorrelation-method linear prediction of ``frame``.

    Uses the biased lag estimate (sum / L), so order 0 has ``gain**2`` equal to
    the mean signal power.
    """
    x = np.asarray(frame, dtype=np.float64)
    if order >= len(x):
        raise ValueError("order must be smaller than the frame length")
    r = _raw_autocorrelation(x, order) / len(x)
    return levinson_durbin(r, order)


def lpc_batch(frames: np.ndarray, order: int):
    """Levinson-Durbin over many frames at once.

    Returns ``(coefficients, ok)`` where ``coefficients`` has shape
    ``(n_frames, order)`` and ``ok`` marks frames whose recursion stayed
    stable at full order.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    r = _raw_autocorrelation(frames, order) / frames.shape[1]
    n = frames.shape[0]
    a = np.zeros((n, order))
    err = r[:, 0].copy()
    ok = err > 0.0
    safe_err = np.where(ok, err, 1.0)
    for i in range(1, order + 1):
        acc = r[:, i] - np.einsum("ij,ij->i", a[:, : i - 1], r[:, i - 1:0:-1])
        k = acc / safe_err
        ok &= np.abs(k) < 1.0
        k = np.where(ok, k, 0.0)
        prev = a[:, : i - 1].copy()
        a[:, : i - 1] = prev - k[:, None] * prev[:, ::-1]
        a[:, i - 1] = k
        safe_err = safe_err * (1.0 - k * k)
        ok &= safe_err > 0.0
        safe_err = np.where(ok, safe_err, 1.0)
    return a, ok


def polynomial_roots(coeffs) -> np.ndarray:
    """Roots of a polynomial (highest power first) via companion eigenvalues."""
    return np.roots(np.asarray(coeffs, dtype=np.float64))


def batch_prediction_poles(coefficients: np.ndarray) -> np.ndarray:
    """Poles of ``1 - sum a_k z^-k`` for each row, shape ``(n, order)``."""
    n, p = coefficients.shape
    comp = np.zeros((n, p, p))
    comp[:, 0, :] = coefficients
    if p > 1:
        comp[:, np.arange(1, p), np.arange(p - 1)] = 1.0
    return np.linalg.eigvals(comp)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters: int, fft_size: int, sample_rate: float,
                   f_lo: float = 0.0, f_hi: float | None = None) -> np.ndarray:
    """Triangular filters equally spaced in mel, shape ``(n_filters, fft_size//2 + 1)``.

    Edges are snapped to FFT bins; each filter rises from the previous center
    to its own center (weight 1) and falls to the next one, so neighbours
    overlap by half.
    """
    if f_hi is None:
        f_hi = sample_rate / 2.0
    if not (0.0 <= f_lo < f_hi <= sample_rate / 2.0):
        raise ValueError("need 0 <= f_lo < f_hi <= sample_rate / 2")
    n_bins = fft_size // 2 + 1
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n_filters + 2))
    bins = np.floor(edges_hz * fft_size / sample_rate + 0.5).astype(int)
    bins = np.clip(bins, 0, n_bins - 1)
    if np.any(np.diff(bins) <= 0):
        raise TooManyFilters(
            f"{n_filters} filters collide at {sample_rate / fft_size:.2f} Hz resolution"
        )
    fb = np.zeros((n_filters, n_bins))
    k = np.arange(n_bins)
    for m in range(n_filters):
        lo, c, hi = bins[m], bins[m + 1], bins[m + 2]
        rise = (k - lo) / (c - lo)
        fall = (hi - k) / (hi - c)
        fb[m] = np.clip(np.minimum(rise, fall), 0.0, None)
    return fb


def dct_ii(vector, n_out: int | None = None) -> np.ndarray:
    """First ``n_out`` orthonormal DCT-II coefficients along the last axis."""
    v = np.asarray(vector, dtype=np.float64)
    n = v.shape[-1]
    if n_out is None:
        n_out = n
    if n_out > n:
        raise ValueError("n_out cannot exceed the input length")
    return sp_fft.dct(v, type=2, norm="ortho", axis=-1)[..., :n_out]


def parabolic_peak(y_left: float, y_mid: float, y_right: float):
    """Vertex offset (in samples, within [-0.5, 0.5]) and height of the parabola
    through three equally spaced points."""
    denom = y_left - 2.0 * y_mid + y_right
    if denom >= 0.0 or not np.isfinite(denom):
        return 0.0, y_mid
    delta = 0.5 * (y_left - y_right) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    return delta, y_mid - 0.25 * (y_left - y_right) * delta


def harmonic_peaks(frames: np.ndarray, f0_hz: np.ndarray, sample_rate: int,
                   fft_size: int = 2048, search: float = 0.3):
    """Locate harmonic peaks of each frame near multiples of its f0.

    Returns ``(omega, power, mask)`` with shape ``(n, max_harmonics)``; omega is
    in radians/sample and mask flags harmonics below Nyquist - 50 Hz.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    f0 = np.asarray(f0_hz, dtype=np.float64)
    top = sample_rate / 2.0 - 50.0
    n_harm = max(1, int(np.floor(top / f0.min())))
    lp = np.log(np.abs(np.fft.rfft(frames, fft_size, axis=1)) ** 2 + 1e-20)
    bin_hz = sample_rate / fft_size
    centre = f0[:, None] * np.arange(1, n_harm + 1)[None, :]
    mask = centre < top
    half = np.maximum(1, np.round(search * f0 / bin_hz)).astype(int)
    off = np.arange(-half.max(), half.max() + 1)
    idx = np.clip(np.round(centre / bin_hz).astype(int)[:, :, None] + off, 1, lp.shape[1] - 2)
    rows = np.arange(len(lp))[:, None]
    vals = np.where(np.abs(off)[None, None, :] <= half[:, None, None], lp[rows[:, :, None], idx], -np.inf)
    j = np.take_along_axis(idx, vals.argmax(axis=2)[..., None], axis=2)[..., 0]
    yl, ym, yr = lp[rows, j - 1], lp[rows, j], lp[rows, j + 1]
    den = yl - 2.0 * ym + yr
    curved = den < 0
    delta = np.clip(np.where(curved, 0.5 * (yl - yr) / np.where(curved, den, -1.0), 0.0), -0.5, 0.5)
    height = ym - 0.25 * (yl - yr) * delta
    return 2.0 * np.pi * (j + delta) * bin_hz / sample_rate, np.exp(height), mask


def discrete_all_pole(omega: np.ndarray, power: np.ndarray, mask: np.ndarray,
                      order: int, iterations: int = 40) -> np.ndarray:
    """All-pole fit to a line spectrum by Itakura-Saito minimisation.

    Seeded with the Yule-Walker solution on the line-spectrum autocorrelation
    and relaxed by fixed-point iteration; the lowest-distortion iterate is kept.
    Returns predictor coefficients ``(n, order)`` in the ``lpc`` convention.
    """
    w = np.asarray(omega, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    pw = np.where(mask, power, 1.0)
    cnt = m.sum(axis=1)
    lags = np.arange(order + 1)
    basis = np.exp(-1j * w[..., None] * lags)
    r = ((m * pw)[:, None, :] @ basis.real)[:, 0, :] / cnt[:, None]
    toe = r[:, np.abs(lags[:, None] - lags[None, :])]
    seed = np.linalg.solve(toe[:, 1:, 1:], r[:, 1:, None])[..., 0]
    a = np.concatenate([np.ones((len(w), 1)), -seed], axis=1)

    def distortion(resp):
        a2 = resp.real ** 2 + resp.imag ** 2
        gain = (m * pw * a2).sum(axis=1) / cnt
        q = pw * a2 / gain[:, None]
        return (m * (q - np.log(q) - 1.0)).sum(axis=1) / cnt

    toe_inv = np.linalg.inv(toe)
    best = a.copy()
    best_d = np.full(len(w), np.inf)
    for _ in range(iterations + 1):
        resp = (basis @ a[:, :, None])[..., 0]
        d = distortion(resp)
        better = d < best_d
        best[better] = a[better]
        best_d[better] = d[better]
        h = ((m / resp)[:, None, :] @ basis)[:, 0, :].real / cnt[:, None]
        step = (toe_inv @ h[:, :, None])[..., 0]
        a = 0.5 * a + 0.5 * step / step[:, :1]
    return -best[:, 1:]
