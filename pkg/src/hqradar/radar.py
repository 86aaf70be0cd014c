"""Martin-Mulgrew radar returns for rotating-blade targets, plus noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

SPEED_OF_LIGHT = 299_792_458.0


def _finite(name, value):
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class DroneProfile:
    """Blade/rotor parameters of one drone type (lengths in meters)."""

    name: str
    n_blades: int
    l1: float
    l2: float
    f_rot: float
    label: int = -1

    def __post_init__(self):
        for k in ("l1", "l2", "f_rot"):
            _finite(k, getattr(self, k))
        if int(self.n_blades) != self.n_blades or self.n_blades < 1:
            raise ParameterError(f"n_blades must be a positive integer, got {self.n_blades}")
        if not 0 <= self.l1 < self.l2:
            raise ParameterError(f"need 0 <= l1 < l2, got l1={self.l1}, l2={self.l2}")
        if self.f_rot <= 0:
            raise ParameterError(f"f_rot must be > 0, got {self.f_rot}")


@dataclass(frozen=True)
class RadarConfig:
    wavelength: float = 0.03
    f_c: float = 10e9
    prf: float = 10_000.0
    duration: float = 0.2

    def __post_init__(self):
        for k in ("wavelength", "f_c", "prf", "duration"):
            _finite(k, getattr(self, k))
        if self.wavelength <= 0:
            raise ParameterError(f"wavelength must be > 0, got {self.wavelength}")
        if self.prf <= 0:
            raise ParameterError(f"prf must be > 0, got {self.prf}")
        if self.duration <= 0:
            raise ParameterError(f"duration must be > 0, got {self.duration}")
        if self.n_samples < 1:
            raise ParameterError("prf * duration rounds to zero samples")

    @property
    def n_samples(self) -> int:
        return int(round(self.prf * self.duration))


@dataclass(frozen=True)
class TargetGeometry:
    """Target pose relative to the radar (angles in radians)."""

    theta: float
    phi_p: float
    range_m: float = 1000.0
    v_rad: float = 0.0
    rotor_phase: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        for k in ("theta", "phi_p", "range_m", "v_rad", "rotor_phase", "amplitude"):
            _finite(k, getattr(self, k))
        if self.amplitude <= 0:
            raise ParameterError(f"amplitude must be > 0, got {self.amplitude}")
        if not -math.pi / 2 < self.theta < math.pi / 2:
            raise ParameterError(f"theta must lie in (-pi/2, pi/2), got {self.theta}")


@dataclass
class ComplexTimeSeries:
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("samples contain non-finite values")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.sample_rate


def sinc(x):
    """Unnormalized sinc, sin(x)/x, with sinc(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    # series 1 - x^2/6 is exact to double precision below 1e-6
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def blade_coefficients(theta: float, phi_p: float) -> tuple[float, float]:
    """Return (alpha, beta) for aspect angle ``theta`` and blade pitch ``phi_p``."""
    a = abs(theta)
    s_plus = math.sin(a + phi_p)
    s_minus = math.sin(a - phi_p)
    sign = (theta > 0) - (theta < 0)
    return s_plus + s_minus, sign * (s_plus - s_minus)


def synthesize_mm(
    profile: DroneProfile,
    radar: RadarConfig,
    geom: TargetGeometry,
    baseband: bool = True,
) -> ComplexTimeSeries:
    """Simulate the complex slow-time return of one rotor.

    Samples are taken at ``t_k = k / prf``. With ``baseband=True`` (default)
    the carrier term ``exp(j 2 pi f_c t)`` is left out; the range and
    body-Doppler phase are always kept.
    """
    t = np.arange(radar.n_samples) / radar.prf
    alpha, beta = blade_coefficients(geom.theta, geom.phi_p)
    k = 4.0 * math.pi / radar.wavelength
    half_sum = 0.5 * (profile.l1 + profile.l2)
    half_diff = 0.5 * (profile.l2 - profile.l1)

    n = np.arange(profile.n_blades)[:, None]
    omega = 2.0 * math.pi * (profile.f_rot * t[None, :] + n / profile.n_blades) + geom.rotor_phase
    gamma = k * math.cos(geom.theta) * np.sin(omega)
    blades = (alpha + beta * np.cos(omega)) * np.exp(-1j * half_sum * gamma) * sinc(half_diff * gamma)

    phase = -k * (geom.range_m + geom.v_rad * t)
    if not baseband:
        phase = phase + 2.0 * math.pi * radar.f_c * t
    out = geom.amplitude * np.exp(1j * phase) * blades.sum(axis=0)
    return ComplexTimeSeries(out, radar.prf)


def noise_variance(snr_db: float, amplitude: float = 1.0) -> float:
    """Complex noise variance giving single-pulse SNR ``10 log10(A^2 / var)``."""
    _finite("snr_db", snr_db)
    _finite("amplitude", amplitude)
    return amplitude**2 / 10.0 ** (snr_db / 10.0)


def _complex_gaussian(rng: np.random.Generator, n: int, sigma2: float) -> np.ndarray:
    scale = math.sqrt(sigma2 / 2.0)
    parts = rng.standard_normal((n, 2)) * scale
    return parts[:, 0] + 1j * parts[:, 1]


def noise_only(length: int, sigma2: float, rng_seed) -> ComplexTimeSeries:
    """Circular complex white Gaussian noise with total variance ``sigma2``.

    The series is tagged with a unit sample rate; callers that care set it.
    """
    if int(length) != length or length <= 0:
        raise ParameterError(f"length must be a positive integer, got {length}")
    _finite("sigma2", sigma2)
    if sigma2 <= 0:
        raise ParameterError(f"sigma2 must be > 0, got {sigma2}")
    rng = np.random.default_rng(rng_seed)
    return ComplexTimeSeries(_complex_gaussian(rng, int(length), sigma2), 1.0)


def add_awgn(ts: ComplexTimeSeries, snr_db: float, amplitude: float, rng_seed) -> ComplexTimeSeries:
    """Add noise calibrated to the synthesis amplitude, not measured power."""
    sigma2 = noise_variance(snr_db, amplitude)
    rng = np.random.default_rng(rng_seed)
    return ComplexTimeSeries(ts.samples + _complex_gaussian(rng, len(ts), sigma2), ts.sample_rate)


def coherent_gain_db(n_pulses: int) -> float:
    if n_pulses < 1:
        raise ParameterError(f"n_pulses must be >= 1, got {n_pulses}")
    return 10.0 * math.log10(n_pulses)
