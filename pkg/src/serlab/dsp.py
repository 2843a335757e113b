"""Waveforms to log-mel spectrogram images.

The chain is: Hamming-windowed power STFT -> triangular mel filterbank
(HTK scale) -> dB relative to the utterance maximum, floored at -80 dB ->
linear rescale to [0, 1] and bilinear resize to the network input size,
replicated over 3 channels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, FileFormatError, MalformedWavError, \
    ShapeError, UnsupportedWavError

DB_FLOOR = -80.0


@dataclass
class Waveform:
    """Mono audio; samples live in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError("Waveform samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, "
                              f"got {self.sample_rate}")
        if not np.isfinite(self.samples).all():
            raise ConfigError("waveform contains non-finite samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SpectrogramConfig:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None   # None -> Nyquist

    def __post_init__(self):
        if self.window_ms <= 0 or self.hop_ms <= 0:
            raise ConfigError("window and hop must be positive")
        if self.n_mels < 2:
            raise ConfigError("n_mels must be at least 2")

    def window_len(self, sample_rate: int) -> int:
        return int(round(self.window_ms * sample_rate / 1000.0))

    def hop_len(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))

    def fft_size(self, sample_rate: int) -> int:
        n = self.window_len(sample_rate)
        size = 1
        while size < n:
            size *= 2
        return size

    def resolve_fmax(self, sample_rate: int) -> float:
        fmax = sample_rate / 2.0 if self.fmax is None else self.fmax
        if not 0 <= self.fmin < fmax:
            raise ConfigError(f"need 0 <= fmin < fmax, got "
                              f"[{self.fmin}, {fmax}]")
        if fmax > sample_rate / 2.0:
            raise ConfigError(f"fmax {fmax} exceeds Nyquist "
                              f"{sample_rate / 2.0}")
        return fmax


@dataclass
class MelSpectrogram:
    """[n_mels x n_frames] matrix in dB (0 dB = utterance max)."""

    values: np.ndarray
    config: SpectrogramConfig
    sample_rate: int


@dataclass
class SpectrogramImage:
    """[3 x H x W] pixels in [0, 1], channels identical."""

    pixels: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.pixels.shape


def n_frames_for(n_samples: int, window_len: int, hop_len: int) -> int:
    return (n_samples - window_len) // hop_len + 1


# -- WAV I/O ------------------------------------------------------------------
# Hand-rolled RIFF parsing so missing / malformed / unsupported files raise
# distinct error kinds, and so 32-bit float WAVs (which the stdlib `wave`
# module rejects) load too.

_PCM = 1
_IEEE_FLOAT = 3


def load_wav(path) -> Waveform:
    """Read a PCM or float32 WAV; stereo is downmixed by channel mean."""
    with open(path, "rb") as f:          # missing file -> FileNotFoundError
        blob = f.read()

    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    off = 12
    while off + 8 <= len(blob):
        cid, size = struct.unpack_from("<4sI", blob, off)
        off += 8
        chunk = blob[off:off + size]
        if cid == b"fmt ":
            if len(chunk) < 16:
                raise MalformedWavError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
        elif cid == b"data":
            if len(chunk) < size:
                raise MalformedWavError(f"{path}: data chunk truncated")
            data = chunk
        off += size + (size & 1)         # chunks are word-aligned

    if fmt is None or data is None:
        raise MalformedWavError(f"{path}: missing fmt or data chunk")

    codec, channels, rate, _, _, bits = fmt
    if channels < 1 or rate <= 0:
        raise MalformedWavError(f"{path}: nonsensical fmt fields")

    if codec == _PCM and bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
        samples = (raw - 128.0) / 128.0
    elif codec == _PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif codec == _PCM and bits == 32:
        samples = np.frombuffer(data, dtype="<i4").astype(np.float64) / 2147483648.0
    elif codec == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedWavError(f"{path}: codec {codec} at {bits} bits "
                                  f"not supported")

    if len(samples) % channels:
        samples = samples[:len(samples) - len(samples) % channels]
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return Waveform(samples=samples, sample_rate=rate)


def save_wav(path, w: Waveform):
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF")
        f.write(struct.pack("<I", 36 + len(data)))
        f.write(b"WAVE")
        f.write(b"fmt ")
        f.write(struct.pack("<IHHIIHH", 16, _PCM, 1, w.sample_rate,
                            w.sample_rate * 2, 2, 16))
        f.write(b"data")
        f.write(struct.pack("<I", len(data)))
        f.write(data)


def fix_duration(w: Waveform, seconds: float = 3.0) -> Waveform:
    """Pad with silence or center-crop so every utterance has one length."""
    target = int(round(seconds * w.sample_rate))
    n = len(w.samples)
    if n == target:
        return w
    if n < target:
        pad = target - n
        samples = np.pad(w.samples, (pad // 2, pad - pad // 2))
    else:
        start = (n - target) // 2
        samples = w.samples[start:start + target].copy()
    return Waveform(samples=samples, sample_rate=w.sample_rate)


# -- spectrogram chain --------------------------------------------------------

def hamming_window(n: int) -> np.ndarray:
    # 0.54 - 0.46 cos(2 pi k / (n-1))
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def stft_power(w: Waveform, cfg: SpectrogramConfig) -> np.ndarray:
    """One-sided power spectrogram, [fft_size/2+1 x n_frames]."""
    win_len = cfg.window_len(w.sample_rate)
    hop = cfg.hop_len(w.sample_rate)
    if len(w.samples) < win_len:
        raise ShapeError(f"waveform has {len(w.samples)} samples but one "
                         f"frame needs {win_len}")
    nfft = cfg.fft_size(w.sample_rate)
    frames = n_frames_for(len(w.samples), win_len, hop)

    idx = np.arange(win_len)[None, :] + hop * np.arange(frames)[:, None]
    windowed = w.samples[idx] * hamming_window(win_len)
    spectrum = np.fft.rfft(windowed, n=nfft, axis=1)
    return (spectrum.real ** 2 + spectrum.imag ** 2).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: SpectrogramConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters, [n_mels x fft_size/2+1]; centers uniform in mel."""
    fmax = cfg.resolve_fmax(sample_rate)
    nfft = cfg.fft_size(sample_rate)
    n_bins = nfft // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / nfft

    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(fmax),
                                  cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def mel_spectrogram(w: Waveform, cfg: SpectrogramConfig) -> MelSpectrogram:
    power = stft_power(w, cfg)
    mel_power = mel_filterbank(cfg, w.sample_rate) @ power
    db = 10.0 * np.log10(np.maximum(mel_power, 1e-10))
    peak = db.max()
    if peak > 10.0 * np.log10(1e-10):
        db -= peak                      # utterance max becomes 0 dB
    # an all-silent utterance stays at the floor instead of rising to 0 dB
    db = np.maximum(db, DB_FLOOR)
    return MelSpectrogram(values=db, config=cfg, sample_rate=w.sample_rate)


def resize_bilinear(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of a 2D matrix; identity when sizes match."""
    in_h, in_w = m.shape
    if in_h == 0 or in_w == 0:
        raise ShapeError("cannot resize an empty matrix")

    def coords(n_in, n_out):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * (n_in - 1) / (n_out - 1)

    ys, xs = coords(in_h, out_h), coords(in_w, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = m[np.ix_(y0, x0)] * (1 - wx) + m[np.ix_(y0, x1)] * wx
    bot = m[np.ix_(y1, x0)] * (1 - wx) + m[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def spectrogram_to_image(m: MelSpectrogram, height: int = 224,
                         width: int = 224) -> SpectrogramImage:
    if m.values.size == 0:
        raise ShapeError("empty spectrogram")
    unit = np.clip((m.values - DB_FLOOR) / (0.0 - DB_FLOOR), 0.0, 1.0)
    resized = np.clip(resize_bilinear(unit, height, width), 0.0, 1.0)
    return SpectrogramImage(pixels=np.repeat(resized[None], 3, axis=0))


# -- inspection artifacts -------------------------------------------------

def save_spectrogram(path, m: MelSpectrogram):
    """Portable float matrix: header (n_mels, n_frames) then LE float64."""
    rows, cols = m.values.shape
    with open(path, "wb") as f:
        f.write(b"SERLMEL1")
        f.write(struct.pack("<II", rows, cols))
        f.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())


def load_spectrogram(path, cfg: SpectrogramConfig | None = None,
                     sample_rate: int = 0) -> MelSpectrogram:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != b"SERLMEL1":
        raise FileFormatError(f"{path}: not a spectrogram matrix file")
    rows, cols = struct.unpack_from("<II", blob, 8)
    values = np.frombuffer(blob, dtype="<f8", count=rows * cols,
                           offset=16).reshape(rows, cols)
    cfg = cfg or SpectrogramConfig(n_mels=max(rows, 2))
    if cfg.n_mels != rows:
        cfg = replace(cfg, n_mels=rows)
    return MelSpectrogram(values=values.astype(np.float64), config=cfg,
                          sample_rate=sample_rate)


def save_image_ppm(path, img: SpectrogramImage):
    """Binary PPM (P6), 8 bits per channel."""
    _, h, w = img.pixels.shape
    rgb = np.clip(np.round(img.pixels * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(rgb.transpose(1, 2, 0).tobytes())
