"""Reference-signal purification.

The auxiliary microphone sits next to the loudspeaker, so its signal is
dominated by the (possibly distorted) far-end sound but still picks up the
near-end talker. A single-tap Wiener cancellation of the far-end signal
leaves a near-end estimate; a compressed ratio mask built from the two
component estimates then suppresses the near-end contribution.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dsp import Spectrogram
from .wiener import WienerConfig, wstws_cancel


@dataclass(frozen=True)
class MaskConfig:
    compression: float = 1.0 / 6.0
    ref_taps: int = 1

    def __post_init__(self):
        if not 0.0 <= self.compression <= 1.0:
            raise ValueError("compression must lie in [0, 1]")
        if self.ref_taps < 1:
            raise ValueError("ref_taps must be >= 1")


@dataclass(eq=False)
class RatioMask:
    """Real gains in [0, 1], one per T-F unit."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("mask values must lie in [0, 1]")


def mask_from_estimates(far_mag: np.ndarray, near_mag: np.ndarray) -> np.ndarray:
    """|far| / (|far| + |near|), with silent units (0/0) mapped to 0."""
    total = far_mag + near_mag
    out = np.zeros_like(total)
    np.divide(far_mag, total, out=out, where=total > 0)
    return np.clip(out, 0.0, 1.0)


def compute_mask(
    R: Spectrogram, X: Spectrogram, cfg: MaskConfig, wiener_cfg: WienerConfig
) -> RatioMask:
    """Ratio mask that keeps the far-end-explained part of the reference.

    The cancellation residual of R against X estimates the near-end
    contamination; what the filter removed estimates the far-end component.
    """
    near, _ = wstws_cancel(R, X, replace(wiener_cfg, taps=cfg.ref_taps))
    far = R.data - near.data
    return RatioMask(mask_from_estimates(np.abs(far), np.abs(near.data)))


def apply_mask(R: Spectrogram, mask: RatioMask, compression: float) -> Spectrogram:
    """Pointwise product of R with the mask raised to the compression exponent.

    compression = 0 is the identity (0**0 reads as 1); compression = 1 applies
    the raw mask.
    """
    if not 0.0 <= compression <= 1.0:
        raise ValueError("compression must lie in [0, 1]")
    if mask.values.shape != R.data.shape:
        raise ValueError("mask and spectrogram shapes differ")
    return R.like(mask.values**compression * R.data)


def purify_reference(
    R: Spectrogram, X: Spectrogram, cfg: MaskConfig, wiener_cfg: WienerConfig
) -> Spectrogram:
    """Masked reference: compute_mask followed by apply_mask."""
    return apply_mask(R, compute_mask(R, X, cfg, wiener_cfg), cfg.compression)
