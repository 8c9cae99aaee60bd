"""Evaluation metrics and the training-style losses as standalone measures.

All log-ratio metrics share a 1e-12 energy floor and a 100 dB cap so reports
stay finite for perfect or degenerate estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Spectrogram, StftConfig, TimeSignal, stft_forward
from .roomsim import Scene

ENERGY_FLOOR = 1e-12
DB_CAP = 100.0

SCENARIOS = ("DT", "ST_NE", "ST_FE")


@dataclass
class MetricReport:
    """Per-scene scores; fields are None where the scenario does not define them."""

    scenario: str
    erle_db: float | None = None
    sdr_db: float | None = None
    s_sisnr_db: float | None = None
    ri_mag_loss: float | None = None


def _check_lengths(a: TimeSignal, b: TimeSignal):
    if len(a) != len(b):
        raise ValueError(f"signal lengths differ: {len(a)} vs {len(b)}")


def _log_ratio_db(num: float, den: float) -> float:
    return float(min(10.0 * np.log10((num + ENERGY_FLOOR) / (den + ENERGY_FLOOR)), DB_CAP))


def erle(y: TimeSignal, e: TimeSignal) -> float:
    """Echo reduction in dB: pre-cancellation mic signal y against residual e."""
    _check_lengths(y, e)
    return _log_ratio_db(y.energy(), e.energy())


def sdr(target: TimeSignal, estimate: TimeSignal) -> float:
    """Plain signal-to-distortion ratio in dB, no scaling projection or
    distortion filter."""
    _check_lengths(target, estimate)
    err = target.samples - estimate.samples
    return _log_ratio_db(target.energy(), float(np.dot(err, err)))


def s_sisnr(target: TimeSignal, estimate: TimeSignal) -> float:
    """Stretched scale-invariant SNR: 10*log10((1+cos)/(1-cos)) of the
    zero-mean cosine similarity, clamped to [-100, 100] dB.

    Positive scaling of either argument leaves the value unchanged.
    """
    _check_lengths(target, estimate)
    t = target.samples - np.mean(target.samples)
    e = estimate.samples - np.mean(estimate.samples)
    nt = np.linalg.norm(t)
    ne = np.linalg.norm(e)
    if nt == 0.0 or ne == 0.0:
        raise ValueError("s_sisnr needs nonzero (non-constant) signals")
    cos = float(np.clip(np.dot(t, e) / (nt * ne), -1.0, 1.0))
    with np.errstate(divide="ignore"):
        value = 10.0 * np.log10((1.0 + cos) / (1.0 - cos)) if cos < 1.0 else np.inf
    return float(np.clip(value, -DB_CAP, DB_CAP))


def _compress(data: np.ndarray, p: float) -> np.ndarray:
    mag = np.abs(data)
    scale = np.zeros_like(mag)
    np.power(mag, p - 1.0, out=scale, where=mag > 0)
    return data * scale


def ri_mag_loss(S: Spectrogram, S_hat: Spectrogram, p: float = 0.5) -> float:
    """Power-law-compressed complex difference plus compressed magnitude
    difference, summed over all T-F units."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if S.data.shape != S_hat.data.shape:
        raise ValueError("spectrogram shapes differ")
    comp = _compress(S.data, p)
    comp_hat = _compress(S_hat.data, p)
    l_ri = float(np.sum(np.abs(comp - comp_hat) ** 2))
    l_mag = float(np.sum((np.abs(S.data) ** p - np.abs(S_hat.data) ** p) ** 2))
    return l_ri + l_mag


def s_sisnr_loss(target: TimeSignal, estimate: TimeSignal) -> float:
    """Negated s_sisnr, so that lower is better."""
    return -s_sisnr(target, estimate)


def combined_loss(
    S: Spectrogram,
    S_hat: Spectrogram,
    s: TimeSignal,
    s_hat: TimeSignal,
    alpha: float = 0.01,
    p: float = 0.5,
) -> float:
    """Spectral loss plus alpha times the (negated) stretched SI-SNR."""
    return ri_mag_loss(S, S_hat, p) + alpha * s_sisnr_loss(s, s_hat)


def infer_scenario(scene: Scene) -> str:
    talker = scene.v.energy() > 0.0
    far_end = scene.x.energy() > 0.0
    if talker and far_end:
        return "DT"
    if talker:
        return "ST_NE"
    if far_end:
        return "ST_FE"
    raise ValueError("scene has neither near-end nor far-end activity")


def evaluate_estimate(
    scenario: str,
    y: TimeSignal,
    s_direct: TimeSignal,
    estimate: TimeSignal,
    stft_cfg: StftConfig | None = None,
    p: float = 0.5,
) -> MetricReport:
    """Scores for one estimate given the scenario and the reference signals.

    Far-end single talk reports echo reduction only; the other scenarios score
    the estimate against the direct-path near-end target.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if scenario == "ST_FE":
        return MetricReport(scenario=scenario, erle_db=erle(y, estimate))
    cfg = stft_cfg or StftConfig()
    return MetricReport(
        scenario=scenario,
        sdr_db=sdr(s_direct, estimate),
        s_sisnr_db=s_sisnr(s_direct, estimate),
        ri_mag_loss=ri_mag_loss(stft_forward(s_direct, cfg), stft_forward(estimate, cfg), p),
    )


def evaluate_scene(
    scene: Scene,
    estimate: TimeSignal,
    stft_cfg: StftConfig | None = None,
    p: float = 0.5,
) -> MetricReport:
    """Scenario-aware scoring of an estimate against a synthesized scene."""
    _check_lengths(scene.y, estimate)
    return evaluate_estimate(
        infer_scenario(scene), scene.y, scene.s_direct, estimate, stft_cfg, p
    )


def report_record(report: MetricReport, scene_id: str) -> dict:
    """Flat serializable record for one scene, with the fixed field names."""
    return {
        "scene_id": scene_id,
        "scenario": report.scenario,
        "erle_db": report.erle_db,
        "sdr_db": report.sdr_db,
        "s_sisnr_db": report.s_sisnr_db,
        "ri_mag_loss": report.ri_mag_loss,
        "pesq": "unavailable",
    }
