"""Waveform primitives: WAV I/O, framing, STFT/ISTFT, FIR band-pass, normalization.

Everything here is a pure function of its inputs. Arrays are float64 throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile
from scipy.signal import fftconvolve

DEFAULT_SR = 22050
FIR_TAPS = 511


class AudioError(ValueError):
    """Raised for invalid or unreadable audio input."""


@dataclass(frozen=True)
class Waveform:
    """Mono sample sequence tagged with its sample rate."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SR

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise AudioError(f"expected 1-D samples, got shape {x.shape}")
        if x.size == 0:
            raise AudioError("waveform is empty")
        if not np.all(np.isfinite(x)):
            raise AudioError("waveform contains NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


@dataclass(frozen=True)
class StftParams:
    fft_size: int = 1024
    hop: int = 256
    window: str = "hann"

    def __post_init__(self):
        n = self.fft_size
        if n <= 0 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if not 0 < self.hop <= n:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        w = self.get_window()
        # COLA for the squared window, which is what weighted overlap-add needs
        env = np.zeros(n + self.hop)
        for start in range(0, n + self.hop, self.hop):
            seg = env[start:start + n]
            seg += (w**2)[: seg.size]
        steady = env[n - self.hop:n]
        if np.ptp(steady) > 1e-9 * max(steady.max(), 1e-300):
            raise ValueError(f"{self.window} window is not COLA at hop {self.hop}")

    def get_window(self) -> np.ndarray:
        return _WINDOWS[self.window](self.fft_size)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


def _periodic_hann(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _rect(n):
    return np.ones(n)


_WINDOWS = {"hann": _periodic_hann, "rect": _rect}


@dataclass(frozen=True)
class SpectralFrames:
    """Complex STFT matrix, one row per frame, plus what is needed to invert it."""

    frames: np.ndarray
    params: StftParams = field(default_factory=StftParams)
    original_length: int = 0
    sample_rate: int = DEFAULT_SR

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[1] != self.params.n_bins:
            raise ValueError(
                f"frames must have {self.params.n_bins} columns, got shape {self.frames.shape}")

    @property
    def power(self) -> np.ndarray:
        return self.frames.real**2 + self.frames.imag**2

    def freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(self.params.fft_size, 1.0 / self.sample_rate)

    def with_frames(self, frames) -> "SpectralFrames":
        return SpectralFrames(np.asarray(frames), self.params, self.original_length, self.sample_rate)


@dataclass(frozen=True)
class BandSpec:
    f_low: float
    f_high: float

    def __post_init__(self):
        if not 0 < self.f_low < self.f_high:
            raise ValueError(f"invalid band ({self.f_low}, {self.f_high})")

    def check(self, sample_rate: int) -> None:
        if self.f_high >= sample_rate / 2:
            raise ValueError(
                f"band ({self.f_low}, {self.f_high}) Hz exceeds Nyquist for {sample_rate} Hz")

    @property
    def center(self) -> float:
        return 0.5 * (self.f_low + self.f_high)

    def __iter__(self):
        return iter((self.f_low, self.f_high))


PAPER_BANDS = (
    BandSpec(1500.0, 3000.0),
    BandSpec(2500.0, 5000.0),
    BandSpec(4000.0, 8000.0),
    BandSpec(7000.0, 11000.0),
)


# --------------------------------------------------------------------------- I/O

def read_wav(path) -> Waveform:
    """Read a PCM or float WAV file as a mono waveform scaled to [-1, 1].

    Integer PCM is mapped by its full-scale divisor (16-bit: 32768), so
    -32768 becomes exactly -1.0. Multi-channel files are averaged to mono.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        sr, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioError(f"{path}: {exc}") from exc
    if data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives left-justified in int32
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise AudioError(f"{path}: unsupported sample format {data.dtype}")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise AudioError(f"{path}: zero-length audio")
    if sr != DEFAULT_SR:
        warnings.warn(f"{path}: sample rate {sr} Hz differs from {DEFAULT_SR} Hz; not resampled",
                      stacklevel=2)
    return Waveform(x, sr)


def to_pcm16(samples: np.ndarray) -> tuple[np.ndarray, int]:
    x = np.asarray(samples, dtype=np.float64)
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    q = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    return q, clipped


def write_wav(path, w: Waveform) -> int:
    """Write ``w`` as 16-bit mono PCM. Returns the number of clipped samples."""
    if not isinstance(w, Waveform):
        w = Waveform(w)
    q, clipped = to_pcm16(w.samples)
    if clipped:
        warnings.warn(f"{path}: {clipped} samples outside [-1, 1] were clipped", stacklevel=2)
    wavfile.write(Path(path), w.sample_rate, q)
    return clipped


# ----------------------------------------------------------------------- framing

def frame_signal(w, frame_len: int, hop: int) -> np.ndarray:
    """Full frames of ``frame_len`` samples every ``hop`` samples; partial tail dropped.

    Returns an array of shape (M, frame_len), with M = 0 when the signal is
    shorter than one frame. The result is a read-only view.
    """
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    if frame_len <= 0 or hop <= 0:
        raise ValueError("frame_len and hop must be positive")
    if x.size < frame_len:
        return np.empty((0, frame_len))
    return sliding_window_view(x, frame_len)[::hop]


def _n_frames(length: int, p: StftParams) -> int:
    pad = p.fft_size // 2
    return int(np.ceil((length + 2 * pad - p.fft_size) / p.hop)) + 1


def stft(w: Waveform, p: StftParams = StftParams()) -> SpectralFrames:
    """Centered STFT: the signal is zero-padded by fft_size/2 on both sides.

    No scaling is folded into the transform; a full-scale bin-aligned sinusoid
    of amplitude A peaks at A * sum(window) / 2.
    """
    x = w.samples
    n = p.fft_size
    if x.size < n:
        raise AudioError(f"waveform of {x.size} samples is shorter than fft_size {n}")
    pad = n // 2
    m = _n_frames(x.size, p)
    total = (m - 1) * p.hop + n
    padded = np.zeros(total)
    padded[pad:pad + x.size] = x
    frames = sliding_window_view(padded, n)[::p.hop][:m] * p.get_window()
    return SpectralFrames(np.fft.rfft(frames, axis=1), p, x.size, w.sample_rate)


def istft(s: SpectralFrames, length: int | None = None) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`, trimmed to ``original_length``."""
    p = s.params
    n = p.fft_size
    length = s.original_length if length is None else length
    if s.frames.shape[1] != p.n_bins:
        raise ValueError("inconsistent frame width")
    need = _n_frames(length, p)
    frames = s.frames
    if frames.shape[0] < need:
        frames = np.vstack([frames, np.zeros((need - frames.shape[0], p.n_bins), complex)])
    win = p.get_window()
    seg = np.fft.irfft(frames, n=n, axis=1) * win
    m = frames.shape[0]
    total = (m - 1) * p.hop + n
    out = np.zeros(total)
    env = np.zeros(total)
    w2 = win**2
    for i in range(m):
        start = i * p.hop
        out[start:start + n] += seg[i]
        env[start:start + n] += w2
    pad = n // 2
    out = out[pad:pad + length]
    env = env[pad:pad + length]
    nz = env > 1e-10
    out[nz] /= env[nz]
    out[~nz] = 0.0
    if out.size < length:
        out = np.concatenate([out, np.zeros(length - out.size)])
    return Waveform(out, s.sample_rate)


def mean_periodogram(w: Waveform, p: StftParams = StftParams()) -> np.ndarray:
    """Mean |X|^2 over the full (unpadded) windowed frames of ``w``.

    Same scaling as ``stft(w).power``. Signals shorter than one frame are
    zero-padded to a single frame.
    """
    x = w.samples
    if x.size < p.fft_size:
        x = np.concatenate([x, np.zeros(p.fft_size - x.size)])
    frames = frame_signal(x, p.fft_size, p.hop) * p.get_window()
    spec = np.fft.rfft(frames, axis=1)
    return np.mean(spec.real**2 + spec.imag**2, axis=0)


# ------------------------------------------------------------------------ filters

@lru_cache(maxsize=64)
def design_bandpass(f_low: float, f_high: float, sample_rate: int,
                    numtaps: int = FIR_TAPS) -> np.ndarray:
    """Hamming-windowed sinc band-pass, scaled to unit gain at the band center.

    An upper edge closer to Nyquist than one transition width (3.3 fs / N for
    Hamming) cannot be realised; such bands become high-pass filters, since a
    truncated sinc there swings negative at Nyquist.
    """
    n = np.arange(numtaps) - (numtaps - 1) / 2.0
    lo = f_low / sample_rate
    hi = f_high / sample_rate
    if 0.5 - hi < 3.3 / numtaps:
        hi = 0.5
    h = 2 * hi * np.sinc(2 * hi * n) - 2 * lo * np.sinc(2 * lo * n)
    h *= np.hamming(numtaps)
    fc = 0.5 * (lo + hi)
    h /= np.abs(np.sum(h * np.exp(-2j * np.pi * fc * n)))
    h.setflags(write=False)
    return h


def fir_response_db(h: np.ndarray, freqs, sample_rate: int) -> np.ndarray:
    """Magnitude response of a linear-phase FIR at ``freqs`` (Hz), in dB."""
    n = np.arange(h.size)
    f = np.atleast_1d(np.asarray(freqs, dtype=float)) / sample_rate
    resp = np.abs(np.exp(-2j * np.pi * np.outer(f, n)) @ h)
    return 20 * np.log10(np.maximum(resp, 1e-300))


def bandpass_filter(w: Waveform, band: BandSpec) -> Waveform:
    """Zero-phase FIR band-pass; output is aligned with and as long as the input."""
    band.check(w.sample_rate)
    h = design_bandpass(float(band.f_low), float(band.f_high), w.sample_rate)
    half = (h.size - 1) // 2
    padded = np.pad(w.samples, half, mode="symmetric")
    y = fftconvolve(padded, h, mode="valid")
    return Waveform(y, w.sample_rate)


def peak_normalize(w: Waveform, ceiling: float = 0.99) -> Waveform:
    """Scale down to ``ceiling`` only when the peak exceeds it."""
    if not 0 < ceiling <= 1:
        raise ValueError(f"ceiling must be in (0, 1], got {ceiling}")
    peak = np.max(np.abs(w.samples))
    if peak <= ceiling:
        return w
    return Waveform(w.samples * (ceiling / peak), w.sample_rate)
