"""Synthetic bird-call corpus with exact clean/noise decomposition, and the
classical augmentations (mix-up, noise overlay, pitch shift, time stretch).
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .dsp import DEFAULT_SR, SpectralFrames, StftParams, Waveform, istft, stft
from .metrics import seg_snr

CLIP_SECONDS = 2.0
ACTIVE_REL = 1e-6


class Envelope(str, enum.Enum):
    HANN = "Hann"
    EXPONENTIAL = "Exponential"


class NoiseKind(str, enum.Enum):
    WHITE = "White"
    PINK = "Pink"
    LOW_HUM = "LowHum"


@dataclass(frozen=True)
class CallSpec:
    """One synthetic call: harmonic linear sweeps repeated as syllables."""

    f_start: float
    f_end: float
    n_harmonics: int = 1
    syllable_count: int = 1
    syllable_len_s: float = 0.2
    gap_len_s: float = 0.1
    envelope: Envelope = Envelope.HANN
    amplitude: float = 0.5
    seed: int = 0
    sample_rate: int = DEFAULT_SR
    clip_s: float = CLIP_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "envelope", Envelope(self.envelope))
        nyq = self.sample_rate / 2
        if not (0 < self.f_start < nyq and 0 < self.f_end < nyq):
            raise ValueError("sweep endpoints must lie in (0, Nyquist)")
        if self.n_harmonics < 1 or self.syllable_count < 1:
            raise ValueError("n_harmonics and syllable_count must be >= 1")
        if max(self.f_start, self.f_end) * self.n_harmonics * (1 + _JITTER) >= nyq:
            raise ValueError("highest harmonic reaches Nyquist")
        if self.syllable_len_s <= 0 or self.gap_len_s <= 0:
            raise ValueError("durations must be positive")
        total = self.syllable_count * self.syllable_len_s + (self.syllable_count - 1) * self.gap_len_s
        if total > self.clip_s + 1e-12:
            raise ValueError(f"call lasts {total:.3f} s, longer than the {self.clip_s} s clip")
        if not 0 <= self.amplitude <= 1:
            raise ValueError("amplitude must be in [0, 1]")

    def to_row(self) -> dict:
        d = asdict(self)
        d["envelope"] = self.envelope.value
        return d


# per-syllable random frequency deviation, as a fraction
_JITTER = 0.02


def _envelope(kind: Envelope, n: int, sr: int) -> np.ndarray:
    if kind is Envelope.HANN:
        return np.hanning(n + 2)[1:-1]
    attack = max(1, min(n // 4, int(0.005 * sr)))
    env = np.exp(-np.arange(n) / (n / 4.0))
    env[:attack] *= np.linspace(0.0, 1.0, attack, endpoint=False)
    return env


def gen_call(spec: CallSpec) -> Waveform:
    """Render ``spec`` into a clip; peak amplitude equals ``spec.amplitude``."""
    sr = spec.sample_rate
    total = int(round(spec.clip_s * sr))
    out = np.zeros(total)
    if spec.amplitude == 0:
        return Waveform(out, sr)
    rng = np.random.default_rng(spec.seed)
    syl = int(round(spec.syllable_len_s * sr))
    gap = int(round(spec.gap_len_s * sr))
    t = np.arange(syl) / sr
    dur = syl / sr
    env = _envelope(spec.envelope, syl, sr)
    harm_amp = 1.0 / np.arange(1, spec.n_harmonics + 1)
    for k in range(spec.syllable_count):
        start = k * (syl + gap)
        if start + syl > total:
            break
        jitter = 1.0 + _JITTER * (2 * rng.random() - 1)
        f0, f1 = spec.f_start * jitter, spec.f_end * jitter
        phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t**2 / dur)
        offsets = rng.uniform(0, 2 * np.pi, spec.n_harmonics)
        syllable = sum(a * np.sin(h * phase + o)
                       for h, (a, o) in enumerate(zip(harm_amp, offsets), start=1))
        out[start:start + syl] += syllable * env * (0.8 + 0.2 * rng.random())
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= spec.amplitude / peak
    return Waveform(out, sr)


def gen_noise(kind: NoiseKind | str, length: int, seed: int, sample_rate: int = DEFAULT_SR
              ) -> Waveform:
    """Unit-RMS noise: white Gaussian, pink (1/f power), or low-frequency hum."""
    kind = NoiseKind(kind)
    if length <= 0:
        raise ValueError("length must be positive")
    rng = np.random.default_rng(seed)
    if kind is NoiseKind.WHITE:
        x = rng.standard_normal(length)
    elif kind is NoiseKind.PINK:
        spec = np.fft.rfft(rng.standard_normal(length))
        f = np.fft.rfftfreq(length, 1.0 / sample_rate)
        shape = np.zeros_like(f)
        shape[1:] = 1.0 / np.sqrt(f[1:])
        x = np.fft.irfft(spec * shape, n=length)
    else:
        t = np.arange(length) / sample_rate
        x = sum(np.sin(2 * np.pi * 150.0 * h * t + rng.uniform(0, 2 * np.pi)) / h
                for h in range(1, 5))
        x = x + 0.03 * rng.standard_normal(length)
    rms = np.sqrt(np.mean(x**2))
    return Waveform(x / rms if rms > 0 else x, sample_rate)


# ---------------------------------------------------------------------- mixing

@dataclass(frozen=True)
class GroundTruthMix:
    clean: Waveform
    noise: Waveform
    mix: Waveform
    target_segsnr_db: float
    achieved_segsnr_db: float
    gain: float = 1.0

    def scaled(self, factor: float) -> "GroundTruthMix":
        """Same mix at a different overall level; SegSNR is unchanged."""
        c = self.clean.samples * factor
        n = self.noise.samples * factor
        sr = self.clean.sample_rate
        return GroundTruthMix(Waveform(c, sr), Waveform(n, sr), Waveform(c + n, sr),
                              self.target_segsnr_db, self.achieved_segsnr_db, self.gain * factor)


def active_seg_snr(clean, noise) -> float:
    """SegSNR restricted to frames where the clean signal is not silent."""
    return seg_snr(clean, noise, active_rel=ACTIVE_REL)


def mix_at_segsnr(clean: Waveform, noise: Waveform, target_db: float) -> GroundTruthMix:
    """Scale ``noise`` so the active-frame SegSNR of the mix equals ``target_db``."""
    if len(clean) != len(noise):
        raise ValueError(f"length mismatch: {len(clean)} vs {len(noise)}")
    if not np.any(clean.samples):
        raise ValueError("clean signal is silent")
    current = active_seg_snr(clean, noise)
    g = 10.0 ** ((current - target_db) / 20.0)
    scaled = noise.samples * g
    n = Waveform(scaled, noise.sample_rate)
    mix = Waveform(clean.samples + scaled, clean.sample_rate)
    return GroundTruthMix(clean, n, mix, float(target_db), active_seg_snr(clean, n), g)


def mixup(a: Waveform, b: Waveform, lam: float) -> Waveform:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not 0 <= lam <= 1:
        raise ValueError("lambda must be in [0, 1]")
    return Waveform(lam * a.samples + (1 - lam) * b.samples, a.sample_rate)


# ---------------------------------------------------------- stretch and shift

def phase_vocoder(s: SpectralFrames, rate: float) -> np.ndarray:
    """Resample STFT frames in time by ``rate`` with phase accumulation."""
    frames = s.frames
    n_bins = frames.shape[1]
    steps = np.arange(0, frames.shape[0], rate)
    advance = np.pi * s.params.hop * np.arange(n_bins) / (n_bins - 1)
    padded = np.vstack([frames, np.zeros((2, n_bins), complex)])
    phase = np.angle(padded[0])
    out = np.empty((steps.size, n_bins), dtype=complex)
    for i, step in enumerate(steps):
        k = int(step)
        frac = step - k
        c0, c1 = padded[k], padded[k + 1]
        mag = (1 - frac) * np.abs(c0) + frac * np.abs(c1)
        out[i] = mag * np.exp(1j * phase)
        dphi = np.angle(c1) - np.angle(c0) - advance
        dphi -= 2 * np.pi * np.round(dphi / (2 * np.pi))
        phase = phase + advance + dphi
    return out


def time_stretch(w: Waveform, rate: float, params: StftParams = StftParams()) -> Waveform:
    """Phase-vocoder time stretch; output has round(len / rate) samples, pitch kept."""
    if not 0.5 <= rate <= 2.0:
        raise ValueError(f"rate must be in [0.5, 2.0], got {rate}")
    out_len = int(round(len(w) / rate))
    s = stft(w, params)
    stretched = phase_vocoder(s, rate)
    return istft(SpectralFrames(stretched, params, out_len, w.sample_rate))


def resample_sinc(x: np.ndarray, out_len: int, zero_crossings: int = 32,
                  kaiser_beta: float = 8.6) -> np.ndarray:
    """Band-limited resampling of ``x`` to ``out_len`` samples over the same span.

    Kaiser-windowed sinc interpolation. When shrinking, the kernel cutoff
    drops to the new Nyquist so nothing aliases.
    """
    n = x.size
    ratio = out_len / n
    cutoff = min(1.0, ratio)
    half = int(np.ceil(zero_crossings / cutoff))
    pos = np.arange(out_len) / ratio
    out = np.empty(out_len)
    xp = np.concatenate([np.zeros(half), x, np.zeros(half + 1)])
    offs = np.arange(-half, half + 1)
    for lo in range(0, out_len, 4096):
        p = pos[lo:lo + 4096]
        base = np.floor(p).astype(int)
        idx = base[:, None] + offs[None, :]
        d = p[:, None] - idx
        arg = np.clip(d / (half + 1), -1.0, 1.0)
        kw = np.i0(kaiser_beta * np.sqrt(1 - arg**2)) / np.i0(kaiser_beta)
        kern = cutoff * np.sinc(cutoff * d) * kw
        out[lo:lo + 4096] = np.einsum("ij,ij->i", kern, xp[idx + half])
    return out


def pitch_shift(w: Waveform, semitones: float, params: StftParams = StftParams()) -> Waveform:
    """Shift pitch by ``semitones`` while keeping the length."""
    if abs(semitones) > 12:
        raise ValueError("|semitones| must be <= 12")
    factor = 2.0 ** (semitones / 12.0)
    n = len(w)
    short_len = int(round(n / factor))
    squeezed = resample_sinc(w.samples, short_len)
    rate = short_len / n
    s = stft(Waveform(squeezed, w.sample_rate), params)
    stretched = phase_vocoder(s, rate)
    return istft(SpectralFrames(stretched, params, n, w.sample_rate))


@dataclass(frozen=True)
class AugmentRanges:
    """Sampling ranges for :func:`random_augment`. Declared defaults, not tuned."""

    mixup_lambda: tuple[float, float] = (0.3, 0.7)
    semitones: tuple[float, float] = (-2.0, 2.0)
    stretch_rate: tuple[float, float] = (0.8, 1.25)
    overlay_db: tuple[float, float] = (0.0, 15.0)


AUGMENTATIONS = ("mixup", "overlay", "pitch", "stretch")


def random_augment(w: Waveform, partner: Waveform, noise: Waveform, seed: int,
                   ranges: AugmentRanges = AugmentRanges()) -> tuple[Waveform, dict]:
    """Apply one randomly chosen augmentation with randomly drawn parameters.

    ``partner`` feeds mix-up and ``noise`` the overlay; both must match ``w``
    in length. Returns the augmented clip and a record of what was applied.
    Stretched clips are cut or zero-padded back to the input length.
    """
    rng = np.random.default_rng(seed)
    kind = AUGMENTATIONS[int(rng.integers(len(AUGMENTATIONS)))]
    if kind == "mixup":
        value = float(rng.uniform(*ranges.mixup_lambda))
        out = mixup(w, partner, value)
    elif kind == "overlay":
        value = float(rng.uniform(*ranges.overlay_db))
        out = mix_at_segsnr(w, noise, value).mix
    elif kind == "pitch":
        value = float(rng.uniform(*ranges.semitones))
        out = pitch_shift(w, value)
    else:
        value = float(rng.uniform(*ranges.stretch_rate))
        y = time_stretch(w, value).samples
        y = np.pad(y, (0, max(0, len(w) - y.size)))[:len(w)]
        out = Waveform(y, w.sample_rate)
    return out, {"kind": kind, "value": value, "seed": seed}


# ---------------------------------------------------------------------- presets

# Twelve stand-in species; every call sits inside 1.5-11 kHz.
PRESETS: tuple[CallSpec, ...] = (
    CallSpec(2200, 2600, 2, 4, 0.18, 0.12, Envelope.HANN, 0.6),
    CallSpec(4200, 3400, 1, 6, 0.08, 0.10, Envelope.EXPONENTIAL, 0.5),
    CallSpec(3000, 3000, 2, 3, 0.25, 0.20, Envelope.HANN, 0.7),
    CallSpec(1800, 2400, 3, 2, 0.40, 0.30, Envelope.HANN, 0.6),
    CallSpec(6000, 7200, 1, 5, 0.10, 0.15, Envelope.EXPONENTIAL, 0.5),
    CallSpec(2600, 1900, 2, 1, 0.70, 0.10, Envelope.HANN, 0.8),
    CallSpec(5000, 4200, 2, 8, 0.05, 0.06, Envelope.EXPONENTIAL, 0.5),
    CallSpec(3500, 5500, 1, 3, 0.20, 0.25, Envelope.HANN, 0.6),
    CallSpec(8000, 9000, 1, 4, 0.12, 0.12, Envelope.HANN, 0.4),
    CallSpec(2400, 2500, 4, 2, 0.30, 0.40, Envelope.EXPONENTIAL, 0.7),
    CallSpec(4500, 4000, 2, 10, 0.04, 0.05, Envelope.HANN, 0.5),
    CallSpec(3200, 6400, 1, 2, 0.35, 0.30, Envelope.HANN, 0.6),
)

NOISE_CYCLE = (NoiseKind.WHITE, NoiseKind.PINK, NoiseKind.LOW_HUM)
MIX_HEADROOM = 0.95


@dataclass(frozen=True)
class CorpusClip:
    clip_id: str
    spec: CallSpec
    noise_kind: NoiseKind
    seed: int
    mix: GroundTruthMix


def make_clip(index: int, master_seed: int, target_db: float) -> CorpusClip:
    """Deterministic clip ``index`` of a corpus; seed = master_seed + index."""
    seed = master_seed + index
    base = PRESETS[index % len(PRESETS)]
    spec = CallSpec(**{**base.to_row(), "seed": seed})
    kind = NOISE_CYCLE[index % len(NOISE_CYCLE)]
    clean = gen_call(spec)
    noise = gen_noise(kind, len(clean), seed + 1_000_003)
    gt = mix_at_segsnr(clean, noise, target_db)
    peak = np.max(np.abs(gt.mix.samples))
    if peak > MIX_HEADROOM:
        gt = gt.scaled(MIX_HEADROOM / peak)
    return CorpusClip(f"clip_{index:04d}", spec, kind, seed, gt)
