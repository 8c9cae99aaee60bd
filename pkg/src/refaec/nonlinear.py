"""Loudspeaker distortion models and the training-time parameter sampler.

Three parametric families (saturating, exponential, polynomial) describe the
mild distortion regime; two composite models chain a clipping stage into a
sigmoid amplitude response to emulate harsher, unseen hardware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import TimeSignal

MATCHED_FAMILIES = ("saturating", "exponential", "polynomial")
MISMATCHED_FAMILIES = ("hard_clip_sigmoid", "soft_clip_sigmoid")

DEFAULT_CLIP_THRESHOLD = 0.7
DEFAULT_SOFT_CLIP_SHAPE = 2.0
SIGMOID_GAIN = 2.0

_B_RANGE = (2.0, 5.0)


@dataclass(frozen=True)
class NonlinearityKind:
    """A distortion family plus its shape parameter where the family takes one."""

    family: str
    b: float | None = None

    def __post_init__(self):
        if self.family in MATCHED_FAMILIES:
            if self.b is None:
                raise ValueError(f"{self.family} requires parameter b")
            if not _B_RANGE[0] <= self.b <= _B_RANGE[1]:
                raise ValueError(f"b={self.b} outside [{_B_RANGE[0]}, {_B_RANGE[1]}]")
        elif self.family in MISMATCHED_FAMILIES or self.family == "identity":
            if self.b is not None:
                raise ValueError(f"{self.family} takes no parameter")
        else:
            raise ValueError(f"unknown nonlinearity family: {self.family}")


def saturating(x, b: float):
    """Smooth amplitude limiter a*x/sqrt(a^2 + x^2) with a = 5/b; odd, |out| < a."""
    a = 5.0 / b
    x = np.asarray(x, dtype=np.float64)
    return a * x / np.sqrt(a * a + x * x)


def exponential(x, b: float):
    """Asymmetric response 1 - exp(-a*x) with a = b/10; strictly increasing."""
    a = b / 10.0
    x = np.asarray(x, dtype=np.float64)
    return 1.0 - np.exp(-a * x)


def _polynomial_raw(x, a: float):
    x = np.asarray(x, dtype=np.float64)
    return 2.0 * a * x + a * x * x + x**3


def polynomial(x, b: float, log_base: str = "ln"):
    """Cubic response 2a*x + a*x^2 + x^3 with a = log(b/10) + 0.1.

    The logarithm defaults to natural log; pass log_base="log10" for the
    base-10 reading.
    """
    if log_base == "ln":
        a = np.log(b / 10.0) + 0.1
    elif log_base == "log10":
        a = np.log10(b / 10.0) + 0.1
    else:
        raise ValueError("log_base must be 'ln' or 'log10'")
    return _polynomial_raw(x, a)


def hard_clip(x, x_max: float = DEFAULT_CLIP_THRESHOLD):
    """Clamp to [-x_max, x_max]."""
    if x_max <= 0:
        raise ValueError("x_max must be > 0")
    return np.clip(np.asarray(x, dtype=np.float64), -x_max, x_max)


def soft_clip(x, x_max: float = DEFAULT_CLIP_THRESHOLD, rho: float = DEFAULT_SOFT_CLIP_SHAPE):
    """Gradual limiter x*x_max/sqrt(|x_max|^rho + |x|^rho); odd, |out| < x_max.

    The denominator takes the square root of the rho-power sum, so rho = 2
    (the default shape) gives the familiar x_max/sqrt(x_max^2 + x^2) roll-off.
    """
    if x_max <= 0:
        raise ValueError("x_max must be > 0")
    if rho <= 0:
        raise ValueError("rho must be > 0")
    x = np.asarray(x, dtype=np.float64)
    return x * x_max / np.sqrt(np.abs(x_max) ** rho + np.abs(x) ** rho)


def sigmoid_stage(x):
    """Sigmoid amplitude response with slope 4 above zero and 0.5 below.

    z = 1.5x - 0.3x^2 feeds a gain-2 sigmoid centered at zero, so the output
    stays inside (-1, 1) and is deliberately asymmetric.
    """
    x = np.asarray(x, dtype=np.float64)
    z = 1.5 * x - 0.3 * x * x
    nu = np.where(z > 0, 4.0, 0.5)
    with np.errstate(over="ignore"):  # exp overflow saturates the sigmoid, by design
        return SIGMOID_GAIN * (1.0 / (1.0 + np.exp(-nu * z)) - 0.5)


def distort(x, kind: NonlinearityKind):
    """Apply one distortion model to raw samples."""
    if kind.family == "identity":
        return np.asarray(x, dtype=np.float64)
    if kind.family == "saturating":
        return saturating(x, kind.b)
    if kind.family == "exponential":
        return exponential(x, kind.b)
    if kind.family == "polynomial":
        return polynomial(x, kind.b)
    if kind.family == "hard_clip_sigmoid":
        return sigmoid_stage(hard_clip(x))
    if kind.family == "soft_clip_sigmoid":
        return sigmoid_stage(soft_clip(x))
    raise ValueError(f"unknown nonlinearity family: {kind.family}")


def apply_nonlinearity(sig: TimeSignal, kind: NonlinearityKind) -> TimeSignal:
    """Sample-wise distortion of a waveform; identity passes bits through."""
    if kind.family == "identity":
        return TimeSignal(sig.samples, sig.sample_rate)
    return TimeSignal(distort(sig.samples, kind), sig.sample_rate)


def sample_kind(rng: np.random.Generator, matched: bool = True) -> NonlinearityKind:
    """Draw a distortion model: one of the three parametric families with
    b ~ Uniform[2, 5] when matched, else one of the two composite models."""
    if matched:
        family = MATCHED_FAMILIES[rng.integers(len(MATCHED_FAMILIES))]
        return NonlinearityKind(family, b=float(rng.uniform(*_B_RANGE)))
    family = MISMATCHED_FAMILIES[rng.integers(len(MISMATCHED_FAMILIES))]
    return NonlinearityKind(family)
