"""Synthetic generators for the seven physiological and four ambient signals.

Each signal is a sinusoid around a baseline plus Gaussian noise, clamped to
the kind's physical bounds:

    value(t) = clamp(baseline + amplitude * sin(2*pi*t / period_ms)
                     + N(0, noise_sd) + anomaly_delta(t))

Anomaly scripts add a constant offset during [onset, onset + duration) and
are the mechanism scenarios use to trip emergency rules deterministically.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .protocol import PHYSICAL_BOUNDS, SENSOR_KINDS, MEDICAL_KINDS, SensorFrame

VITALS_SAMPLE_PERIOD_MS = 1000
AMBIENT_SAMPLE_PERIOD_MS = 10000

# open physical bounds are clamped this far inside so that frame values,
# which are rounded to 4 decimals, stay strictly within the bound
OPEN_BOUND_MARGIN = 1e-4


@dataclass(frozen=True)
class SensorProfile:
    kind: str
    baseline: float
    amplitude: float = 0.0
    period_ms: int = 60000
    noise_sd: float = 0.0
    sample_period_ms: int = VITALS_SAMPLE_PERIOD_MS


@dataclass(frozen=True)
class AnomalyScript:
    kind: str
    onset: int
    duration_ms: int
    delta: float

    def active_at(self, t: int) -> bool:
        return self.onset <= t < self.onset + self.duration_ms


@dataclass
class SensorState:
    """Per-sensor frame counter; one per (patient, kind) kernel node."""
    sensor_id: str
    patient_id: str
    profile: SensorProfile
    scripts: list[AnomalyScript] = field(default_factory=list)
    seq: int = 0


def signal_value(profile: SensorProfile, scripts, t: int,
                 noise: float = 0.0) -> float:
    """Closed-form signal at time t plus a pre-drawn noise term, clamped."""
    value = profile.baseline
    if profile.amplitude:
        value += profile.amplitude * math.sin(2.0 * math.pi * t / profile.period_ms)
    value += noise
    for script in scripts:
        if script.kind == profile.kind and script.active_at(t):
            value += script.delta
    b = PHYSICAL_BOUNDS[profile.kind]
    lo = b.lo + OPEN_BOUND_MARGIN if b.lo_open else b.lo
    hi = b.hi - OPEN_BOUND_MARGIN if b.hi_open else b.hi
    return min(max(value, lo), hi)


def generate_frame(state: SensorState, t: int, rng: random.Random) -> SensorFrame:
    """Emit the frame for sample time t; t must sit on the sample grid."""
    if t % state.profile.sample_period_ms != 0:
        raise ValueError(f"t={t} not aligned to {state.profile.sample_period_ms} ms grid")
    noise = rng.gauss(0.0, state.profile.noise_sd) if state.profile.noise_sd > 0 else 0.0
    value = signal_value(state.profile, state.scripts, t, noise)
    state.seq += 1
    return SensorFrame(sensor_id=state.sensor_id, patient_id=state.patient_id,
                       kind=state.profile.kind, t=t, value=round(value, 4),
                       seq=state.seq)


# artifact defaults: plausible resting values, gentle periodicity, light noise
_DEFAULTS = {
    "ECG": (1.0, 0.3, 1000, 0.05),
    "EMG": (0.5, 0.2, 2000, 0.05),
    "Respiration": (16.0, 2.0, 60000, 0.3),
    "Heartbeat": (80.0, 5.0, 60000, 1.0),
    "BodyTemp": (36.8, 0.2, 300000, 0.03),
    "SystolicPressure": (115.0, 6.0, 120000, 1.5),
    "SpO2": (97.0, 0.5, 60000, 0.2),
    "AmbientTemp": (22.0, 1.0, 600000, 0.1),
    "Humidity": (45.0, 5.0, 600000, 0.5),
    "AirQuality": (40.0, 8.0, 900000, 1.0),
    "AtmPressure": (1013.0, 2.0, 1800000, 0.2),
}


def default_profiles() -> dict[str, SensorProfile]:
    """One profile per sensor kind; vitals at 1 Hz, ambient at 0.1 Hz."""
    profiles = {}
    for kind in SENSOR_KINDS:
        baseline, amplitude, period, noise = _DEFAULTS[kind]
        sample = (VITALS_SAMPLE_PERIOD_MS if kind in MEDICAL_KINDS
                  else AMBIENT_SAMPLE_PERIOD_MS)
        profiles[kind] = SensorProfile(kind=kind, baseline=baseline,
                                       amplitude=amplitude, period_ms=period,
                                       noise_sd=noise, sample_period_ms=sample)
    return profiles
