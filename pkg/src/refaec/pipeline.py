"""Orchestration: the linear cancellation stage producing the seven-signal
feature bundle, dataset synthesis, batch evaluation, and run configuration."""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import Spectrogram, StftConfig, TimeSignal, stft_forward, stft_inverse
from .masking import MaskConfig, apply_mask, compute_mask
from .metrics import evaluate_estimate, report_record
from .nonlinear import NonlinearityKind, sample_kind
from .roomsim import SER_GRID_DB, sample_geometry, sample_room, synthesize_scene
from .wavio import read_wav, write_wav
from .wiener import WienerConfig, wstws_cancel

FEATURE_MAGIC = b"ECF1"
FEATURE_VERSION = 1
N_BUNDLE_SIGNALS = 7
_HEADER = struct.Struct("<4sIIIIII")

MANIFEST_NAME = "manifest.jsonl"
CORPUS_PEAK = 0.95


class FeatureFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Linear-stage configuration; defaults are the tuned operating point
    (20-tap main solves over 200 frames, single-tap reference solve,
    1/6 mask compression)."""

    stft: StftConfig = field(default_factory=StftConfig)
    wiener_main: WienerConfig = field(default_factory=WienerConfig)
    wiener_ref: WienerConfig = field(default_factory=lambda: WienerConfig(taps=1))
    mask: MaskConfig = field(default_factory=MaskConfig)
    seed: int = 0


@dataclass(eq=False)
class FeatureBundle:
    """The seven aligned spectrograms consumed by a downstream model:
    far-end, mic, reference, masked reference, and the three cancellation
    residuals (mic vs far-end, mic vs reference, mic vs masked reference)."""

    far: Spectrogram
    mic: Spectrogram
    ref: Spectrogram
    ref_masked: Spectrogram
    resid_far: Spectrogram
    resid_ref: Spectrogram
    resid_ref_masked: Spectrogram
    scene_id: str | None = None

    def signals(self) -> list[Spectrogram]:
        return [
            self.far,
            self.mic,
            self.ref,
            self.ref_masked,
            self.resid_far,
            self.resid_ref,
            self.resid_ref_masked,
        ]

    def __post_init__(self):
        shapes = {s.data.shape for s in self.signals()}
        if len(shapes) != 1:
            raise ValueError(f"bundle signals disagree on shape: {shapes}")

    @property
    def config(self) -> StftConfig:
        return self.mic.config


def run_linear_stage(
    y: TimeSignal,
    x: TimeSignal,
    r: TimeSignal,
    cfg: RunConfig | None = None,
    scene_id: str | None = None,
) -> FeatureBundle:
    """Purify the reference, then cancel the mic signal against the far-end,
    raw reference, and purified reference. Strictly frame-online end to end."""
    cfg = cfg or RunConfig()
    if not (len(y) == len(x) == len(r)):
        raise ValueError("y, x, r must share a length")
    if not (y.sample_rate == x.sample_rate == r.sample_rate):
        raise ValueError("y, x, r must share a sample rate")

    Y = stft_forward(y, cfg.stft)
    X = stft_forward(x, cfg.stft)
    R = stft_forward(r, cfg.stft)

    mask = compute_mask(R, X, cfg.mask, cfg.wiener_ref)
    R_m = apply_mask(R, mask, cfg.mask.compression)

    resid_far, _ = wstws_cancel(Y, X, cfg.wiener_main)
    resid_ref, _ = wstws_cancel(Y, R, cfg.wiener_main)
    resid_ref_masked, _ = wstws_cancel(Y, R_m, cfg.wiener_main)

    return FeatureBundle(
        far=X,
        mic=Y,
        ref=R,
        ref_masked=R_m,
        resid_far=resid_far,
        resid_ref=resid_ref,
        resid_ref_masked=resid_ref_masked,
        scene_id=scene_id,
    )


def export_features(bundle: FeatureBundle, path) -> None:
    """Write the bundle as little-endian interleaved float32, frame-major,
    behind a fixed 28-byte header. Bit-exact across platforms."""
    cfg = bundle.config
    n_frames, n_bins = bundle.mic.data.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                FEATURE_MAGIC,
                FEATURE_VERSION,
                n_frames,
                n_bins,
                N_BUNDLE_SIGNALS,
                cfg.window_len,
                cfg.hop,
            )
        )
        for spec in bundle.signals():
            interleaved = np.empty((n_frames, n_bins, 2), dtype="<f4")
            interleaved[..., 0] = spec.data.real
            interleaved[..., 1] = spec.data.imag
            fh.write(interleaved.tobytes())


def read_features(path) -> tuple[dict, list[np.ndarray]]:
    """Read a feature file back; returns the header fields and the seven
    complex64 matrices in bundle order."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFormatError("file shorter than the header")
    magic, version, n_frames, n_bins, n_signals, window_len, hop = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != FEATURE_MAGIC:
        raise FeatureFormatError(f"bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise FeatureFormatError(f"unsupported version {version}")
    expected = _HEADER.size + n_signals * n_frames * n_bins * 8
    if len(raw) != expected:
        raise FeatureFormatError(f"file is {len(raw)} bytes, expected {expected}")
    header = {
        "version": version,
        "n_frames": n_frames,
        "n_bins": n_bins,
        "n_signals": n_signals,
        "window_len": window_len,
        "hop": hop,
    }
    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    per_signal = flat.reshape(n_signals, n_frames, n_bins, 2)
    signals = [
        (per_signal[i, ..., 0] + 1j * per_signal[i, ..., 1]).astype(np.complex64)
        for i in range(n_signals)
    ]
    return header, signals


def _scene_rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=base_seed, spawn_key=(index,)))


def _load_corpus_clip(path, rng: np.random.Generator, n: int, sample_rate: int) -> TimeSignal:
    sig = read_wav(path)
    if sig.sample_rate != sample_rate:
        raise ValueError(f"{path}: expected {sample_rate} Hz, got {sig.sample_rate}")
    x = sig.samples
    if len(x) > n:
        offset = int(rng.integers(0, len(x) - n + 1))
        x = x[offset : offset + n]
    elif len(x) < n:
        x = np.concatenate([x, np.zeros(n - len(x))])
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (CORPUS_PEAK / peak)
    return TimeSignal(x, sample_rate)


def _list_corpus(directory) -> list[Path]:
    files = sorted(Path(directory).glob("*.wav"))
    if not files:
        raise ValueError(f"no .wav files in corpus directory {directory}")
    return files


def _nonlinearity_record(kind: NonlinearityKind) -> dict:
    return {"family": kind.family, "b": kind.b}


def synth_dataset(
    count: int,
    matched: bool,
    out_dir,
    seed: int,
    corpus_near,
    corpus_far,
    duration: float = 6.0,
    sample_rate: int = 16000,
) -> Path:
    """Synthesize `count` double-talk scenes and write waveforms plus a
    manifest. Every scene is reproducible from the base seed and its index,
    so reruns are byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    near_files = _list_corpus(corpus_near)
    far_files = _list_corpus(corpus_far)
    n = int(round(duration * sample_rate))

    records = []
    for index in range(count):
        rng = _scene_rng(seed, index)
        scene_id = f"scene_{index:06d}"
        room = sample_room(rng)
        geom = sample_geometry(room, rng)
        kind = sample_kind(rng, matched=matched)
        ser_db = int(SER_GRID_DB[rng.integers(len(SER_GRID_DB))])
        near_path = near_files[rng.integers(len(near_files))]
        far_path = far_files[rng.integers(len(far_files))]
        v = _load_corpus_clip(near_path, rng, n, sample_rate)
        x = _load_corpus_clip(far_path, rng, n, sample_rate)

        scene = synthesize_scene(room, geom, v, x, kind, ser_db, seed=index, duration=duration)

        files = {}
        for name, sig in (("y", scene.y), ("x", scene.x), ("r", scene.r), ("sd", scene.s_direct)):
            rel = f"{scene_id}/{name}.wav"
            write_wav(out / rel, sig)
            files[name] = rel

        records.append(
            {
                "scene_id": scene_id,
                "index": index,
                "base_seed": seed,
                "files": files,
                "room": {
                    "length": room.length,
                    "width": room.width,
                    "height": room.height,
                    "t60": room.t60,
                },
                "geometry": {
                    "loudspeaker": list(geom.loudspeaker),
                    "talker": list(geom.talker),
                    "main_mic": list(geom.main_mic),
                    "ref_mic": list(geom.ref_mic),
                },
                "nonlinearity": _nonlinearity_record(kind),
                "ser_db": scene.ser_db,
                "echo_gain": scene.echo_gain,
                "scenario": "DT",
                "duration": duration,
                "sample_rate": sample_rate,
                "corpus": {"near": near_path.name, "far": far_path.name},
            }
        )

    manifest = out / MANIFEST_NAME
    with open(manifest, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return manifest


def read_manifest(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    ids = [r["scene_id"] for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("manifest contains duplicate scene ids")
    return records


def run_dataset(
    manifest_path,
    out_dir,
    cfg: RunConfig | None = None,
    export: bool = False,
) -> list[Path]:
    """Run the linear stage over every manifest scene. Writes the masked-
    reference residual as `<scene_id>.wav` (the stage's primary estimate)
    and, when export is set, the full feature bundle as `<scene_id>.ecf`."""
    cfg = cfg or RunConfig()
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for rec in read_manifest(manifest_path):
        scene_id = rec["scene_id"]
        y = read_wav(root / rec["files"]["y"])
        x = read_wav(root / rec["files"]["x"])
        r = read_wav(root / rec["files"]["r"])
        bundle = run_linear_stage(y, x, r, cfg, scene_id=scene_id)
        estimate = stft_inverse(bundle.resid_ref_masked)
        est_path = out / f"{scene_id}.wav"
        write_wav(est_path, estimate)
        written.append(est_path)
        if export:
            export_features(bundle, out / f"{scene_id}.ecf")
    return written


def eval_dataset(
    manifest_path,
    estimates_dir,
    report_path,
    stft_cfg: StftConfig | None = None,
) -> list[dict]:
    """Score `<scene_id>.wav` estimates against the dataset ground truth and
    write one JSON record per scene."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    estimates = Path(estimates_dir)
    rows = []
    for rec in read_manifest(manifest_path):
        scene_id = rec["scene_id"]
        est_path = estimates / f"{scene_id}.wav"
        if not est_path.exists():
            raise FileNotFoundError(f"missing estimate {est_path}")
        y = read_wav(root / rec["files"]["y"])
        s_direct = read_wav(root / rec["files"]["sd"])
        estimate = read_wav(est_path)
        n = min(len(y), len(estimate))
        report = evaluate_estimate(
            rec["scenario"],
            TimeSignal(y.samples[:n], y.sample_rate),
            TimeSignal(s_direct.samples[:n], s_direct.sample_rate),
            TimeSignal(estimate.samples[:n], estimate.sample_rate),
            stft_cfg,
        )
        rows.append(report_record(report, scene_id))
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with open(report_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return rows


def _coerce(value: str, target_type):
    if target_type is bool:
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return target_type(value)


def parse_config_file(path, base: RunConfig | None = None) -> RunConfig:
    """Flat key-value overrides for the run configuration.

    Keys are dotted field paths (for example `wiener_main.taps = 8`); blank
    lines and `#` comments are ignored.
    """
    cfg = base or RunConfig()
    sections = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    overrides: dict[str, dict] = {}
    scalars: dict[str, object] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected `key = value`")
            key, value = (part.strip() for part in line.split("=", 1))
            if "." in key:
                section, fname = key.split(".", 1)
                if section not in sections or not dataclasses.is_dataclass(sections[section]):
                    raise ValueError(f"{path}:{lineno}: unknown config section {section!r}")
                sub = sections[section]
                sub_fields = {f.name: f for f in dataclasses.fields(sub)}
                if fname not in sub_fields:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                ftype = type(getattr(sub, fname))
                overrides.setdefault(section, {})[fname] = _coerce(value, ftype)
            else:
                if key != "seed":
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                scalars["seed"] = int(value)
    replaced = {
        name: dataclasses.replace(sections[name], **fields)
        for name, fields in overrides.items()
    }
    return dataclasses.replace(cfg, **replaced, **scalars)
