"""Shared test utilities: signal generators and independent oracles.

The oracles here deliberately re-derive quantities through routes different
from the library (dense loops, lstsq, direct DFTs) so the tests stay
meaningful.
"""

import numpy as np
from scipy.signal import lfilter

from refaec import Spectrogram, StftConfig, TimeSignal
from refaec.dsp import delay_stack
from refaec.wiener import WienerConfig, lambda_weight


def speech_like(rng, n, fs=16000, peak=0.95):
    """Syllabically modulated colored noise: broad spectrum, speech-ish
    envelope, peak-normalized so clipping stages engage."""
    white = rng.standard_normal(n)
    sig = lfilter([1.0], [1.0, -0.93], white)
    for _ in range(3):
        f0 = rng.uniform(300.0, 3200.0)
        bw = rng.uniform(80.0, 300.0)
        r = np.exp(-np.pi * bw / fs)
        theta = 2 * np.pi * f0 / fs
        sig = lfilter([1.0], [1.0, -2 * r * np.cos(theta), r * r], sig) * (1 - r)
    env = lfilter([1.0], [1.0, -0.999], np.abs(rng.standard_normal(n)))
    env /= np.abs(env).max() + 1e-12
    sig = sig * (0.15 + 0.85 * env)
    return TimeSignal(sig * (peak / np.abs(sig).max()), fs)


def random_spectrogram(rng, n_frames, cfg=None, scale=1.0):
    cfg = cfg or StftConfig()
    shape = (n_frames, cfg.n_bins)
    data = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return Spectrogram(data, cfg)


def dense_normal_equations(Y, X, t, f, cfg: WienerConfig):
    """Dense weighted normal-equations solve for one unit, built with plain
    python loops and a generic linear solve."""
    taps = cfg.taps
    A = np.zeros((taps, taps), dtype=complex)
    b = np.zeros(taps, dtype=complex)
    for tp in range(max(0, t - cfg.window_frames), t + 1):
        if cfg.weighted:
            ref = t if cfg.lambda_mode == "frozen" else tp
            w = 1.0 / lambda_weight(Y, ref, f, cfg.window_frames, cfg.floor)
        else:
            w = 1.0
        xv = delay_stack(X, tp, f, taps)
        for i in range(taps):
            b[i] += w * xv[i] * np.conj(Y.data[tp, f])
            for j in range(taps):
                A[i, j] += w * xv[i] * np.conj(xv[j])
    trace = A.trace().real
    if trace <= 0:
        return np.zeros(taps, dtype=complex)
    for i in range(taps):
        A[i, i] += cfg.diag_load * trace / taps
    return np.linalg.solve(A, b)


def lstsq_weighted(Y, X, t, f, cfg: WienerConfig):
    """Same optimum through an SVD route: loading-augmented weighted least
    squares on the stacked design matrix."""
    taps = cfg.taps
    rows_m, rows_y, weights = [], [], []
    for tp in range(max(0, t - cfg.window_frames), t + 1):
        if cfg.weighted:
            ref = t if cfg.lambda_mode == "frozen" else tp
            w = 1.0 / lambda_weight(Y, ref, f, cfg.window_frames, cfg.floor)
        else:
            w = 1.0
        rows_m.append(delay_stack(X, tp, f, taps))
        rows_y.append(Y.data[tp, f])
        weights.append(w)
    M = np.array(rows_m)
    yv = np.array(rows_y)
    sw = np.sqrt(np.array(weights))
    gram_trace = float(np.sum((sw[:, None] * np.abs(M)) ** 2))
    ridge = np.sqrt(cfg.diag_load * gram_trace / taps) * np.eye(taps)
    M_aug = np.vstack([sw[:, None] * M, ridge])
    y_aug = np.concatenate([sw * yv, np.zeros(taps)])
    g, *_ = np.linalg.lstsq(M_aug, y_aug, rcond=None)
    return np.conj(g)


def schroeder_t60(rir, fs, drop_lo=5.0, drop_hi=25.0):
    """Decay time from backward energy integration, fitted over the
    [-drop_lo, -drop_hi] dB span and extrapolated to -60 dB."""
    energy = np.asarray(rir, dtype=float) ** 2
    edc = np.cumsum(energy[::-1])[::-1]
    edc = edc / edc[0]
    db = 10.0 * np.log10(np.maximum(edc, 1e-300))
    i_lo = int(np.searchsorted(-db, drop_lo))
    i_hi = int(np.searchsorted(-db, drop_hi))
    if i_hi - i_lo < 8:
        return float("nan")
    t = np.arange(len(energy)) / fs
    slope, _ = np.polyfit(t[i_lo:i_hi], db[i_lo:i_hi], 1)
    return float(-60.0 / slope)


def harmonic_distortion(nonlinearity, fs=16000, f0=500.0, amplitude=1.0, n=16000):
    """Total harmonic distortion of a pure tone pushed through a sample-wise
    nonlinearity, from the FFT magnitudes at integer harmonics."""
    t = np.arange(n)
    cycles = round(f0 * n / fs)
    x = amplitude * np.sin(2 * np.pi * cycles * t / n)
    spec = np.abs(np.fft.rfft(nonlinearity(x)))
    fund = spec[cycles]
    harmonics = [spec[k * cycles] for k in range(2, 8) if k * cycles < len(spec)]
    return float(np.sqrt(np.sum(np.square(harmonics))) / fund)
