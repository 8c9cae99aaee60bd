"""WAV input/output. All toolkit artifacts are 16 kHz mono 32-bit float RIFF,
which avoids quantization interacting with the metric floors; common PCM
inputs are accepted and scaled to [-1, 1] on read."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .dsp import TimeSignal

_INT_SCALES = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
    np.dtype(np.uint8): 128.0,
}


def read_wav(path) -> TimeSignal:
    rate, data = wavfile.read(path)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype in _INT_SCALES:
        scale = _INT_SCALES[data.dtype]
        offset = scale if data.dtype == np.dtype(np.uint8) else 0.0
        data = (data.astype(np.float64) - offset) / scale
    else:
        data = data.astype(np.float64)
    return TimeSignal(data, int(rate))


def write_wav(path, sig: TimeSignal) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, sig.sample_rate, sig.samples.astype(np.float32))
