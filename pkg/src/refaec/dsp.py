"""STFT analysis/synthesis and the time/frequency containers shared by all stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

DEFAULT_SAMPLE_RATE = 16000

_OLA_FLOOR = 1e-12


def _as_mono_float(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a mono 1-D signal, got shape {arr.shape}")
    return arr


@dataclass(eq=False)
class TimeSignal:
    """Mono sampled waveform; amplitudes are dimensionless, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = _as_mono_float(self.samples)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters. Defaults are 20 ms windows with 10 ms hop at 16 kHz."""

    window_len: int = 320
    hop: int = 160
    window: str = "hamming"

    def __post_init__(self):
        if self.window_len <= 0 or self.window_len % 2 != 0:
            raise ValueError("window_len must be a positive even sample count")
        if not 0 < self.hop <= self.window_len:
            raise ValueError("hop must satisfy 0 < hop <= window_len")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            raise ValueError(
                f"signal of {n_samples} samples is shorter than one {self.window_len}-sample window"
            )
        return 1 + (n_samples - self.window_len) // self.hop

    def analysis_window(self) -> np.ndarray:
        return get_window(self.window, self.window_len, fftbins=True)


@dataclass(eq=False)
class Spectrogram:
    """One-sided complex T-F matrix, frames along axis 0 and bins along axis 1."""

    data: np.ndarray
    config: StftConfig
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise ValueError(f"spectrogram must be 2-D, got shape {self.data.shape}")
        if self.data.shape[1] != self.config.n_bins:
            raise ValueError(
                f"spectrogram has {self.data.shape[1]} bins, config expects {self.config.n_bins}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite entries")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    def like(self, data: np.ndarray) -> "Spectrogram":
        """New spectrogram sharing this one's config and sample rate."""
        return Spectrogram(data, self.config, self.sample_rate)


def stft_forward(sig: TimeSignal, cfg: StftConfig | None = None) -> Spectrogram:
    """Windowed one-sided STFT.

    Frames start at multiples of the hop; trailing samples that do not fill a
    window are dropped. Callers that need them must pad explicitly, which keeps
    frame counts deterministic across the toolkit.
    """
    cfg = cfg or StftConfig()
    n_frames = cfg.n_frames(len(sig))
    frames = sliding_window_view(sig.samples, cfg.window_len)[:: cfg.hop][:n_frames]
    spec = np.fft.rfft(frames * cfg.analysis_window(), axis=1)
    return Spectrogram(spec, cfg, sig.sample_rate)


def stft_inverse(spec: Spectrogram) -> TimeSignal:
    """Overlap-add synthesis with the least-squares compensation window.

    Each analysis-windowed frame is weighted by the analysis window again and
    the overlap-added result is normalized by the summed squared window, which
    reconstructs the input exactly wherever at least one frame covers it.
    """
    cfg = spec.config
    win = cfg.analysis_window()
    frames = np.fft.irfft(spec.data, n=cfg.window_len, axis=1)
    n_frames = spec.n_frames
    out_len = (n_frames - 1) * cfg.hop + cfg.window_len
    num = np.zeros(out_len)
    den = np.zeros(out_len)
    weighted = frames * win
    win_sq = win * win
    for t in range(n_frames):
        start = t * cfg.hop
        num[start : start + cfg.window_len] += weighted[t]
        den[start : start + cfg.window_len] += win_sq
    return TimeSignal(num / np.maximum(den, _OLA_FLOOR), spec.sample_rate)


def delay_stack(spec: Spectrogram, t: int, f: int, taps: int) -> np.ndarray:
    """Current-and-past values [S(t,f), S(t-1,f), ..., S(t-taps+1,f)].

    Frames before index 0 read as zero, so the stack is always defined.
    """
    if taps < 1:
        raise ValueError("taps must be >= 1")
    if not 0 <= t < spec.n_frames or not 0 <= f < spec.n_bins:
        raise IndexError(f"unit ({t}, {f}) outside {spec.data.shape}")
    out = np.zeros(taps, dtype=np.complex128)
    lo = max(0, t - taps + 1)
    out[: t - lo + 1] = spec.data[t : lo - 1 if lo > 0 else None : -1, f]
    return out


def delay_embed(data: np.ndarray, taps: int) -> np.ndarray:
    """Delay stacks for every unit at once, shape [n_frames, n_bins, taps].

    Entry [t, f, k] equals data[t-k, f] with zero prehistory; equivalent to
    calling delay_stack per unit.
    """
    n_frames, n_bins = data.shape
    padded = np.concatenate(
        [np.zeros((taps - 1, n_bins), dtype=data.dtype), data], axis=0
    )
    # window index j maps to data[t - (taps-1) + j]; reverse so k counts lags
    view = sliding_window_view(padded, taps, axis=0)
    return view[..., ::-1]
