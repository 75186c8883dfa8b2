"""Wheel-rail safety limits, criticality labelling and a synthetic data source.

Criticality rules (severity ``Normal < P2 < P1 < P0``):

=========  ==============  ===============  ===============
class      wheel relief    L/V loaded       L/V empty
=========  ==============  ===============  ===============
Normal     x < 50 %        x <= 0.6         x <= 0.6
P2         50 <= x < 60    (none)           0.6 < x < 0.8
P1         60 <= x < 85    0.6 < x < 0.8    0.8 <= x < 1.0
P0         x >= 85         x >= 0.8         x >= 1.0
=========  ==============  ===============  ===============

The label is the more severe of the relief and L/V verdicts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ConfigError, DataError


class Criticality(IntEnum):
    NORMAL = 0
    P2 = 1
    P1 = 2
    P0 = 3

    @property
    def label(self) -> str:
        return CLASS_NAMES[self.value]

    @property
    def class_index(self) -> int:
        """Dense 1-based class index used by the classifiers."""
        return self.value + 1

    @classmethod
    def from_label(cls, name: str) -> "Criticality":
        try:
            return cls(CLASS_NAMES.index(name))
        except ValueError:
            raise DataError(f"unknown criticality {name!r}") from None


CLASS_NAMES = ("Normal", "P2", "P1", "P0")


# --------------------------------------------------------------------------
# Nadal limit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NadalParams:
    """Flange contact angle ``alpha`` (radians) and friction coefficient ``mu``."""

    contact_angle: float
    friction: float

    def __post_init__(self):
        if not 0.0 < self.contact_angle < math.pi / 2:
            raise ConfigError("contact angle must lie in (0, pi/2)")
        if self.friction < 0:
            raise ConfigError("friction coefficient must be >= 0")

    @classmethod
    def from_degrees(cls, alpha_deg: float, mu: float) -> "NadalParams":
        return cls(math.radians(alpha_deg), mu)


def nadal_limit(params: NadalParams) -> float:
    """Wheel-climb L/V limit ``(tan a - mu) / (1 + mu tan a)``.

    Equivalent to ``tan(a - atan(mu))``.  A non-positive result (``mu >=
    tan a``) is returned with a warning.
    """
    t = math.tan(params.contact_angle)
    mu = params.friction
    value = (t - mu) / (1.0 + mu * t)
    if value <= 0:
        warnings.warn("friction exceeds tan(contact angle): non-positive Nadal limit", stacklevel=2)
    return value


# --------------------------------------------------------------------------
# Labelling
# --------------------------------------------------------------------------


def relief_severity(relief):
    relief = np.asarray(relief, dtype=float)
    return np.select([relief >= 85, relief >= 60, relief >= 50], [3, 2, 1], default=0)


def lv_severity(lv, loaded):
    lv = np.asarray(lv, dtype=float)
    loaded = np.asarray(loaded, dtype=bool)
    loaded_sev = np.select([lv >= 0.8, lv > 0.6], [3, 2], default=0)
    empty_sev = np.select([lv >= 1.0, lv >= 0.8, lv > 0.6], [3, 2, 1], default=0)
    return np.where(loaded, loaded_sev, empty_sev)


def _as_loaded(load) -> np.ndarray:
    arr = np.asarray(load)
    if arr.dtype == bool:
        return arr
    flat = np.char.lower(arr.astype(str))
    bad = ~np.isin(flat, ("loaded", "empty"))
    if bad.any():
        raise DataError(f"load state must be 'loaded' or 'empty', got {flat[bad].ravel()[0]!r}")
    return flat == "loaded"


def label_criticality_array(relief, lv, load) -> np.ndarray:
    """Vectorised labelling; returns severities 0..3."""
    relief = np.asarray(relief, dtype=float)
    lv = np.asarray(lv, dtype=float)
    if np.any(~np.isfinite(relief)) or np.any((relief < 0) | (relief > 100)):
        raise DataError("wheel relief must lie in [0, 100]")
    if np.any(~np.isfinite(lv)) or np.any(lv < 0):
        raise DataError("L/V must be finite and >= 0")
    return np.maximum(relief_severity(relief), lv_severity(lv, _as_loaded(load)))


def label_criticality(relief: float, lv: float, load: str | bool) -> Criticality:
    return Criticality(int(label_criticality_array(relief, lv, load)))


# --------------------------------------------------------------------------
# Synthetic generator
# --------------------------------------------------------------------------

BODIES = ("box", "t_lead", "t_trail")
CHANNEL_NAMES = (
    *(f"acel_lat_{b}" for b in BODIES),
    *(f"acel_vert_{b}" for b in BODIES),
    *(f"yaw_{b}" for b in BODIES),
    *(f"pitch_{b}" for b in BODIES),
    *(f"roll_{b}" for b in BODIES),
    "speed",
    "curvature",
    "type_load",
)

# bands drawn for each (rule, severity); upper ends of the open bands are
# synthetic caps
_RELIEF_BANDS = {0: (0.0, 50.0), 1: (50.0, 60.0), 2: (60.0, 85.0), 3: (85.0, 100.0)}
_LV_BANDS = {
    True: {0: (0.0, 0.6), 2: (0.6, 0.8), 3: (0.8, 1.2)},
    False: {0: (0.0, 0.6), 1: (0.6, 0.8), 2: (0.8, 1.0), 3: (1.0, 1.4)},
}


def _default_signatures() -> dict:
    return {
        "Normal": {"yaw_box": 0.0},
        "P2": {"yaw_box": 1.2},
        "P1": {"yaw_box": 2.4},
        "P0": {"yaw_box": 3.6},
    }


@dataclass(frozen=True)
class SimConfig:
    """Synthetic track-section recording.

    ``signatures`` maps class name to per-channel mean shifts (in noise-free
    units) added on top of the latent physics, whose strength is scaled by
    ``physics_gain``.  ``noise_std`` scales the additive Gaussian noise on
    every channel except the load flag.
    """

    n_sections: int = 10
    samples_per_section: int = 500
    mixture: dict = field(default_factory=lambda: {"Normal": 0.7, "P2": 0.1, "P1": 0.1, "P0": 0.1})
    signatures: dict = field(default_factory=_default_signatures)
    noise_std: float = 1.0
    physics_gain: float = 1.5
    loaded_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_sections < 1 or self.samples_per_section < 1:
            raise ConfigError("need at least one section and one sample per section")
        unknown = set(self.mixture) - set(CLASS_NAMES)
        if unknown:
            raise ConfigError(f"unknown classes in mixture: {sorted(unknown)}")
        probs = np.array([self.mixture.get(c, 0.0) for c in CLASS_NAMES], dtype=float)
        if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
            raise ConfigError("mixture probabilities must be non-negative and sum to 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not 0.0 <= self.loaded_fraction <= 1.0:
            raise ConfigError("loaded_fraction must lie in [0, 1]")
        for cls_name, sig in self.signatures.items():
            if cls_name not in CLASS_NAMES:
                raise ConfigError(f"signature for unknown class {cls_name!r}")
            bad = set(sig) - set(CHANNEL_NAMES)
            if bad:
                raise ConfigError(f"signature names unknown channels {sorted(bad)}")

    @property
    def n_samples(self) -> int:
        return self.n_sections * self.samples_per_section

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([self.mixture.get(c, 0.0) for c in CLASS_NAMES], dtype=float)

    @property
    def planted_channel(self) -> str:
        """Channel with the largest spread of class mean shifts."""
        spread = {}
        for ch in CHANNEL_NAMES:
            vals = [self.signatures.get(c, {}).get(ch, 0.0) for c in CLASS_NAMES]
            spread[ch] = max(vals) - min(vals)
        return max(CHANNEL_NAMES, key=lambda ch: spread[ch])


@dataclass(frozen=True)
class SimulatedRecording:
    dataset: TimeSeriesDataset
    relief: np.ndarray
    lv: np.ndarray
    section: np.ndarray


def _draw_latent(rng, severity: int, loaded: bool) -> tuple[float, float]:
    lv_bands = _LV_BANDS[loaded]
    drivers = ["relief"] + (["lv"] if severity in lv_bands else [])
    driver = drivers[rng.integers(len(drivers))]
    if driver == "relief":
        lo, hi = _RELIEF_BANDS[severity]
        relief = rng.uniform(lo, hi)
        other = [s for s in lv_bands if s <= severity]
        lo, hi = lv_bands[other[rng.integers(len(other))]]
        lv = rng.uniform(lo, hi)
    else:
        lo, hi = lv_bands[severity]
        lv = rng.uniform(lo, hi)
        lo, hi = _RELIEF_BANDS[int(rng.integers(severity + 1))]
        relief = rng.uniform(lo, hi)
    return relief, lv


def simulate(cfg: SimConfig) -> SimulatedRecording:
    """Draw a labelled recording; identical configs give identical output.

    Per sample: a class from ``mixture``, a load state, and latent (relief,
    L/V) inside bands whose combined verdict is that class.  Vertical
    accelerations and roll rates follow relief, lateral accelerations and
    truck yaw rates follow L/V, speed and curvature follow the track
    section, and each class adds its signature shifts.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    probs = cfg.probabilities
    severity = rng.choice(len(CLASS_NAMES), size=n, p=probs)
    loaded = rng.random(n) < cfg.loaded_fraction
    relief = np.empty(n)
    lv = np.empty(n)
    for k in range(n):
        relief[k], lv[k] = _draw_latent(rng, int(severity[k]), bool(loaded[k]))
    assert np.array_equal(label_criticality_array(relief, lv, loaded), severity)

    section = np.repeat(np.arange(cfg.n_sections), cfg.samples_per_section)
    sec_speed = rng.uniform(40.0, 80.0, cfg.n_sections)
    sec_curv = rng.uniform(-1.0, 1.0, cfg.n_sections)

    r = (relief - 50.0) / 25.0
    q = (lv - 0.6) / 0.25
    idx = {name: j for j, name in enumerate(CHANNEL_NAMES)}
    X = np.zeros((n, len(CHANNEL_NAMES)))
    gains = {b: cfg.physics_gain * g for b, g in (("box", 0.6), ("t_lead", 1.0), ("t_trail", 1.4))}
    for b, g in gains.items():
        X[:, idx[f"acel_vert_{b}"]] = g * r
        X[:, idx[f"roll_{b}"]] = 0.5 * g * r
        X[:, idx[f"acel_lat_{b}"]] = g * q + 0.3 * sec_curv[section]
    X[:, idx["yaw_t_lead"]] = 0.8 * cfg.physics_gain * q
    X[:, idx["yaw_t_trail"]] = 0.8 * cfg.physics_gain * q
    X[:, idx["pitch_box"]] = 0.2 * (sec_speed[section] - 60.0) / 10.0
    X[:, idx["speed"]] = sec_speed[section]
    X[:, idx["curvature"]] = sec_curv[section]
    for sev, name in enumerate(CLASS_NAMES):
        for ch, shift in cfg.signatures.get(name, {}).items():
            X[severity == sev, idx[ch]] += shift
    noisy = [j for j, name in enumerate(CHANNEL_NAMES) if name != "type_load"]
    X[:, noisy] += cfg.noise_std * rng.standard_normal((n, len(noisy)))
    X[:, idx["type_load"]] = loaded.astype(float)

    ds = TimeSeriesDataset(
        X,
        severity + 1,
        CHANNEL_NAMES,
        CLASS_NAMES,
        np.where(loaded, "loaded", "empty"),
    )
    return SimulatedRecording(ds, relief, lv, section)


def simulate_dataset(cfg: SimConfig) -> TimeSeriesDataset:
    return simulate(cfg).dataset
