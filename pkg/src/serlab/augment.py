"""Waveform and spectrogram augmentations.

Five time-domain transforms (noise, peak normalization, pitch shift, circular
time shift, speed change) plus time/frequency masking of mel spectrograms.
Every transform is a deterministic function of (input, spec); randomness
comes only from the seed carried by the spec.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .dsp import MelSpectrogram, Waveform
from .errors import ConfigError


class TimeAugmentKind(str, Enum):
    NOISE = "noise"
    NORMALIZE = "normalize"
    PITCH_SHIFT = "pitch_shift"
    TIME_SHIFT = "time_shift"
    SPEED_CHANGE = "speed_change"


class MaskAxis(str, Enum):
    TIME = "time"
    FREQUENCY = "frequency"


class MaskFill(str, Enum):
    ZERO = "zero"
    MEAN = "mean"


@dataclass(frozen=True)
class TimeAugmentSpec:
    kind: TimeAugmentKind
    snr_db: float = 20.0          # noise
    target_peak: float = 1.0      # normalize
    semitones: float = 2.0        # pitch_shift
    shift_fraction: float = 0.25  # time_shift
    speed_factor: float = 1.25    # speed_change
    seed: int = 0

    def __post_init__(self):
        if not 5.0 <= self.snr_db <= 40.0:
            raise ConfigError(f"snr_db {self.snr_db} outside [5, 40]")
        if not -0.5 <= self.shift_fraction <= 0.5:
            raise ConfigError(f"shift_fraction {self.shift_fraction} "
                              f"outside [-0.5, 0.5]")
        if not 0.5 <= self.speed_factor <= 2.0:
            raise ConfigError(f"speed_factor {self.speed_factor} "
                              f"outside [0.5, 2.0]")
        if not 0.0 < self.target_peak <= 1.0:
            raise ConfigError(f"target_peak {self.target_peak} outside (0, 1]")


@dataclass(frozen=True)
class SpecMaskSpec:
    axis: MaskAxis
    max_width: int
    num_masks: int = 1
    fill: MaskFill = MaskFill.ZERO
    seed: int = 0

    def __post_init__(self):
        if self.max_width < 1:
            raise ConfigError("max_width must be >= 1")
        if self.num_masks < 0:
            raise ConfigError("num_masks must be >= 0")


def derive_seed(global_seed: int, *parts) -> int:
    """Stable per-item seed from a global seed plus identifying parts."""
    h = hashlib.sha256(repr((global_seed,) + parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


def _resample_linear(x: np.ndarray, new_len: int) -> np.ndarray:
    if new_len == len(x):
        return x.copy()
    pos = np.linspace(0.0, len(x) - 1.0, new_len)
    return np.interp(pos, np.arange(len(x)), x)


def apply_time_augmentation(w: Waveform, spec: TimeAugmentSpec) -> Waveform:
    x = w.samples
    if spec.kind is TimeAugmentKind.NOISE:
        rng = np.random.default_rng(spec.seed)
        noise = rng.standard_normal(len(x))
        p_signal = np.mean(x * x)
        if p_signal > 0:
            # rescale so the injected noise hits the target SNR exactly
            p_target = p_signal / 10.0 ** (spec.snr_db / 10.0)
            noise *= np.sqrt(p_target / np.mean(noise * noise))
            x = x + noise
        return Waveform(samples=np.clip(x, -1.0, 1.0),
                        sample_rate=w.sample_rate)
    if spec.kind is TimeAugmentKind.NORMALIZE:
        peak = np.abs(x).max()
        scaled = x * (spec.target_peak / peak) if peak > 0 else x.copy()
        return Waveform(samples=scaled, sample_rate=w.sample_rate)
    if spec.kind is TimeAugmentKind.TIME_SHIFT:
        k = int(round(spec.shift_fraction * len(x)))
        return Waveform(samples=np.roll(x, k), sample_rate=w.sample_rate)
    if spec.kind is TimeAugmentKind.SPEED_CHANGE:
        new_len = max(2, int(round(len(x) / spec.speed_factor)))
        return Waveform(samples=_resample_linear(x, new_len),
                        sample_rate=w.sample_rate)
    if spec.kind is TimeAugmentKind.PITCH_SHIFT:
        # speed-changed read wrapped to the original length; a straight
        # resample back would undo the shift exactly, and phase vocoders
        # are out of scope
        factor = 2.0 ** (spec.semitones / 12.0)
        n = len(x)
        pos = (np.arange(n) * factor) % n
        closed = np.concatenate([x, x[:1]])
        shifted = np.interp(pos, np.arange(n + 1), closed)
        return Waveform(samples=shifted, sample_rate=w.sample_rate)
    raise ConfigError(f"unknown augmentation kind {spec.kind!r}")


def apply_spec_mask(m: MelSpectrogram, spec: SpecMaskSpec) -> MelSpectrogram:
    values = m.values.copy()
    n_mels, n_frames = values.shape
    dim = n_frames if spec.axis is MaskAxis.TIME else n_mels
    if spec.max_width >= dim:
        raise ConfigError(f"max_width {spec.max_width} must be smaller than "
                          f"the {spec.axis.value} dimension {dim}")
    fill = 0.0 if spec.fill is MaskFill.ZERO else float(values.mean())
    rng = np.random.default_rng(spec.seed)
    for _ in range(spec.num_masks):
        width = int(rng.integers(1, spec.max_width + 1))
        start = int(rng.integers(0, dim - width + 1))
        if spec.axis is MaskAxis.TIME:
            values[:, start:start + width] = fill
        else:
            values[start:start + width, :] = fill
    return MelSpectrogram(values=values, config=m.config,
                          sample_rate=m.sample_rate)


def expand_sample(w: Waveform, specs: list[TimeAugmentSpec]) -> list[Waveform]:
    """One augmented waveform per spec; the original is not included."""
    if not specs:
        raise ConfigError("expand_sample needs at least one augmentation spec")
    return [apply_time_augmentation(w, spec) for spec in specs]


def default_time_augment_bank(seed: int = 0) -> list[TimeAugmentSpec]:
    """One spec per transform kind, parameters drawn from the default
    ranges (SNR 15-30 dB, shift up to 0.25, speed 0.8-1.25, pitch up to
    2 semitones). Magnitudes are kept away from the identity so each
    variant audibly differs from the source."""
    rng = np.random.default_rng(seed)
    sign = lambda: float(rng.choice([-1.0, 1.0]))  # noqa: E731
    return [
        TimeAugmentSpec(kind=TimeAugmentKind.NOISE,
                        snr_db=float(rng.uniform(15.0, 30.0)),
                        seed=derive_seed(seed, "noise")),
        TimeAugmentSpec(kind=TimeAugmentKind.NORMALIZE,
                        target_peak=float(rng.uniform(0.6, 1.0)),
                        seed=derive_seed(seed, "normalize")),
        TimeAugmentSpec(kind=TimeAugmentKind.PITCH_SHIFT,
                        semitones=sign() * float(rng.uniform(0.5, 2.0)),
                        seed=derive_seed(seed, "pitch")),
        TimeAugmentSpec(kind=TimeAugmentKind.TIME_SHIFT,
                        shift_fraction=sign() * float(rng.uniform(0.05, 0.25)),
                        seed=derive_seed(seed, "shift")),
        TimeAugmentSpec(kind=TimeAugmentKind.SPEED_CHANGE,
                        speed_factor=float(rng.choice([rng.uniform(0.8, 0.95),
                                                       rng.uniform(1.05, 1.25)])),
                        seed=derive_seed(seed, "speed")),
    ]


def reseed(spec: TimeAugmentSpec, seed: int) -> TimeAugmentSpec:
    return replace(spec, seed=seed)
