"""Labeled spectrogram datasets for drone detection and classification.

File layout (all integers little-endian)::

    b"MDQD" | u32 format_version | u32 n | n bytes UTF-8 JSON manifest
    | per example: u8 label, float32 data[2][n_bins][n_frames]
    | u32 CRC-32 of every preceding byte

The manifest JSON schema is documented in ``docs/manifest_schema.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ChecksumError, MagicError, ParameterError, TruncationError, VersionError
from .radar import (
    DroneProfile,
    RadarConfig,
    TargetGeometry,
    add_awgn,
    noise_only,
    noise_variance,
    synthesize_mm,
)
from .spectrogram import Spectrogram, n_frames, stft_complex

MAGIC = b"MDQD"
FORMAT_VERSION = 1

DETECTION = "detection"
CLASSIFICATION = "classification"
DETECTION_CLASSES = ("noise", "drone")
CLASSIFICATION_CLASSES = (
    "DJI Matrice 300 RTK",
    "DJI Mavic Air 2",
    "DJI Mavic Mini",
    "DJI Phantom 4",
    "Parrot Disco",
)


def builtin_profiles() -> list[DroneProfile]:
    """The five drone types in table order; ``label`` is the classification id."""
    return [
        DroneProfile("DJI Mavic Air 2", 2, 0.005, 0.070, 91.66, label=1),
        DroneProfile("DJI Mavic Mini 2", 2, 0.005, 0.035, 160.0, label=2),
        DroneProfile("DJI Matrice 300 RTK", 2, 0.050, 0.2665, 70.0, label=0),
        DroneProfile("DJI Phantom 4", 2, 0.006, 0.050, 116.0, label=3),
        DroneProfile("Parrot Disco", 2, 0.010, 0.104, 40.0, label=4),
    ]


def profiles_by_label() -> list[DroneProfile]:
    return sorted(builtin_profiles(), key=lambda p: p.label)


def class_names(task: str) -> tuple[str, ...]:
    if task == DETECTION:
        return DETECTION_CLASSES
    if task == CLASSIFICATION:
        return CLASSIFICATION_CLASSES
    raise ParameterError(f"task must be '{DETECTION}' or '{CLASSIFICATION}', got {task!r}")


@dataclass(frozen=True)
class GeometrySampler:
    """Uniform ranges for the target pose; |theta| is drawn from ``theta_range``
    and given a random sign."""

    theta_range: tuple = (0.05, 1.3)
    phi_p_range: tuple = (0.087, 0.26)
    range_interval: tuple = (100.0, 2000.0)
    v_rad_range: tuple = (-10.0, 10.0)
    amplitude: float = 1.0

    def __post_init__(self):
        for name in ("theta_range", "phi_p_range", "range_interval", "v_rad_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ParameterError(f"{name} must be a nonempty finite interval, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        lo, hi = self.theta_range
        if lo < 0.05 or hi >= math.pi / 2:
            raise ParameterError(f"theta_range must lie within [0.05, pi/2), got {self.theta_range}")
        if not self.amplitude > 0:
            raise ParameterError(f"amplitude must be > 0, got {self.amplitude}")

    def sample(self, rng: np.random.Generator) -> TargetGeometry:
        mag = rng.uniform(*self.theta_range)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return TargetGeometry(
            theta=sign * mag,
            phi_p=rng.uniform(*self.phi_p_range),
            range_m=rng.uniform(*self.range_interval),
            v_rad=rng.uniform(*self.v_rad_range),
            rotor_phase=rng.uniform(0.0, 2.0 * math.pi),
            amplitude=self.amplitude,
        )

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class DatasetManifest:
    task: str
    snr_db: float
    counts: dict
    seed: int
    standardization: dict
    stft: dict
    radar: dict
    sampler: dict
    class_names: list = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(**d)

    @property
    def n_examples(self) -> int:
        return int(sum(self.counts.values()))

    @property
    def example_shape(self) -> tuple[int, int, int]:
        return (2, self.stft["window"], self.stft["n_frames"])


@dataclass
class LabeledExample:
    spectrogram: Spectrogram
    label: int


@dataclass
class SpectrogramSet:
    """Stacked examples: ``x`` is float32 ``[n, 2, bins, frames]``, ``y`` uint8 ``[n]``."""

    x: np.ndarray
    y: np.ndarray
    sample_rate: float = 10_000.0
    hop: int = 8

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i) -> LabeledExample:
        return LabeledExample(Spectrogram(self.x[i], self.sample_rate, self.hop), int(self.y[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        return (
            isinstance(other, SpectrogramSet)
            and self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def example_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Per-example entropy: ``SeedSequence([seed, index])``."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


def _raw_example(task, label, index, seed, snr_db, sampler, radar, window, hop):
    """Complex STFT for one example, before standardization."""
    geom_ss, noise_ss = example_seed(seed, index).spawn(2)
    profiles = profiles_by_label()
    if task == DETECTION:
        if label == 0:
            sigma2 = noise_variance(snr_db, sampler.amplitude)
            ts = noise_only(radar.n_samples, sigma2, noise_ss)
            return stft_complex(ts.samples, window, hop)
        # drone types cycle so the five types are equally represented
        profile = profiles[index % len(profiles)]
    else:
        profile = profiles[label]
    geom = sampler.sample(np.random.default_rng(geom_ss))
    ts = add_awgn(synthesize_mm(profile, radar, geom), snr_db, sampler.amplitude, noise_ss)
    return stft_complex(ts.samples, window, hop)


def _normalize_counts(task, counts) -> dict:
    names = class_names(task)
    if isinstance(counts, int):
        counts = {n: counts for n in names}
    unknown = set(counts) - set(names)
    if unknown:
        raise ParameterError(f"unknown classes for {task}: {sorted(unknown)}")
    out = {n: int(counts.get(n, 0)) for n in names}
    if task == DETECTION and out["noise"] < 1:
        raise ParameterError("detection datasets need at least one noise example")
    if any(c < 1 for c in out.values()):
        raise ParameterError(f"every class needs a count >= 1, got {out}")
    return out


def split_counts(total: int, task: str) -> dict:
    """Balanced per-class counts summing to ``total`` (detection: half noise)."""
    names = class_names(task)
    base, extra = divmod(int(total), len(names))
    return {n: base + (i < extra) for i, n in enumerate(names)}


def compute_standardization(x: np.ndarray) -> dict:
    axes = (0, 2, 3)
    mean = x.mean(axis=axes)
    std = x.std(axis=axes)
    std = np.where(std > 0, std, 1.0)
    return {"mean": [float(v) for v in mean], "std": [float(v) for v in std]}


def apply_standardization(x: np.ndarray, stats: dict) -> np.ndarray:
    mean = np.asarray(stats["mean"], dtype=np.float64)[None, :, None, None]
    std = np.asarray(stats["std"], dtype=np.float64)[None, :, None, None]
    return (x - mean) / std


def generate(
    task: str,
    snr_db: float,
    counts,
    sampler: GeometrySampler | None = None,
    seed: int = 0,
    *,
    standardization: dict | None = None,
    radar: RadarConfig | None = None,
    window: int = 16,
    hop: int = 8,
    threads: int = 1,
) -> tuple[SpectrogramSet, DatasetManifest]:
    """Simulate a labeled, shuffled, standardized spectrogram set.

    ``counts`` maps class name to count (or is one int used for every class).
    Pass the training manifest's ``standardization`` when building evaluation
    sets; otherwise statistics are computed from the generated examples.
    Output depends only on the arguments, not on ``threads``.
    """
    sampler = sampler or GeometrySampler()
    radar = radar or RadarConfig()
    counts = _normalize_counts(task, counts)
    if not math.isfinite(snr_db):
        raise ParameterError(f"snr_db must be finite, got {snr_db}")

    labels = np.concatenate([np.full(c, i, dtype=np.uint8) for i, c in enumerate(counts.values())])
    frames = n_frames(radar.n_samples, window, hop)

    def job(i):
        return _raw_example(task, int(labels[i]), i, seed, snr_db, sampler, radar, window, hop)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            specs = list(pool.map(job, range(len(labels))))
    else:
        specs = [job(i) for i in range(len(labels))]
    raw = np.empty((len(labels), 2, window, frames), dtype=np.float64)
    for i, s in enumerate(specs):
        raw[i, 0], raw[i, 1] = s.real, s.imag

    order = np.random.default_rng(example_seed(seed, 2**32)).permutation(len(labels))
    raw, labels = raw[order], labels[order]
    if standardization is None:
        standardization = compute_standardization(raw)
    x = apply_standardization(raw, standardization).astype(np.float32)

    manifest = DatasetManifest(
        task=task,
        snr_db=float(snr_db),
        counts=counts,
        seed=int(seed),
        standardization=standardization,
        stft={"window": window, "hop": hop, "n_frames": frames, "sample_rate": radar.prf, "window_fn": "hamming-symmetric"},
        radar=asdict(radar),
        sampler=sampler.to_dict(),
        class_names=list(class_names(task)),
    )
    return SpectrogramSet(x, labels, radar.prf, hop), manifest


def _manifest_bytes(manifest: DatasetManifest) -> bytes:
    return json.dumps(manifest.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def to_bytes(data: SpectrogramSet, manifest: DatasetManifest) -> bytes:
    if len(data) != manifest.n_examples:
        raise ParameterError(f"manifest counts {manifest.n_examples} != {len(data)} examples")
    mb = _manifest_bytes(manifest)
    n = len(data)
    per = int(np.prod(data.x.shape[1:]))
    rec = np.empty((n, 1 + 4 * per), dtype=np.uint8)
    rec[:, 0] = data.y
    rec[:, 1:] = np.ascontiguousarray(data.x, dtype="<f4").reshape(n, per).view(np.uint8)
    body = MAGIC + struct.pack("<II", manifest.format_version, len(mb)) + mb + rec.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def from_bytes(raw: bytes, source="<bytes>") -> tuple[SpectrogramSet, DatasetManifest]:
    if raw[:4] != MAGIC:
        raise MagicError(f"{source}: not a dataset file")
    if len(raw) < 12:
        raise TruncationError(f"{source}: header truncated")
    version, mlen = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise VersionError(f"{source}: format version {version}, expected {FORMAT_VERSION}")
    if len(raw) < 12 + mlen:
        raise TruncationError(f"{source}: manifest truncated")
    try:
        manifest = DatasetManifest.from_dict(json.loads(raw[12 : 12 + mlen].decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as exc:
        raise ChecksumError(f"{source}: manifest unreadable ({exc})") from exc
    if manifest.format_version != FORMAT_VERSION:
        raise VersionError(f"{source}: manifest format_version {manifest.format_version}, expected {FORMAT_VERSION}")
    shape = manifest.example_shape
    per = int(np.prod(shape))
    n = manifest.n_examples
    expected = 12 + mlen + n * (1 + 4 * per) + 4
    if len(raw) < expected:
        raise TruncationError(f"{source}: expected {expected} bytes, found {len(raw)}")
    if len(raw) > expected:
        raise ChecksumError(f"{source}: {len(raw) - expected} trailing bytes")
    if zlib.crc32(raw[:-4]) != struct.unpack("<I", raw[-4:])[0]:
        raise ChecksumError(f"{source}: CRC-32 mismatch")
    rec = np.frombuffer(raw, dtype=np.uint8, count=n * (1 + 4 * per), offset=12 + mlen).reshape(n, 1 + 4 * per)
    y = rec[:, 0].copy()
    x = rec[:, 1:].copy().view("<f4").reshape((n,) + shape).astype(np.float32)
    counts = np.bincount(y, minlength=len(manifest.class_names))
    if list(counts) != [manifest.counts[name] for name in manifest.class_names]:
        raise ChecksumError(f"{source}: label counts {list(counts)} disagree with manifest")
    return SpectrogramSet(x, y, manifest.stft["sample_rate"], manifest.stft["hop"]), manifest


def save(data: SpectrogramSet, manifest: DatasetManifest, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(data, manifest))


def load(path) -> tuple[SpectrogramSet, DatasetManifest]:
    with open(path, "rb") as fh:
        return from_bytes(fh.read(), str(path))


def fingerprint(data: SpectrogramSet) -> str:
    """SHA-256 over labels and float32 payload, used in run manifests."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.y).tobytes())
    h.update(np.ascontiguousarray(data.x, dtype="<f4").tobytes())
    return h.hexdigest()
