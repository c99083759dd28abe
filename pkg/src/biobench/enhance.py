"""Multi-band adaptive bird-call enhancement (MABE) and classical baselines.

MABE keeps a weighted mix of band-passed copies of the input as the signal
estimate and runs spectral subtraction only on what is left over (the
residual), with a noise reference picked from the residual itself. The
baselines are full-spectrum spectral subtraction and the Ephraim-Malah
MMSE-STSA / MMSE-LSA estimators, all of which take their noise estimate from
the opening 0.25 s of the clip.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1, i0e, i1e

from .dsp import (
    PAPER_BANDS,
    AudioError,
    BandSpec,
    StftParams,
    Waveform,
    bandpass_filter,
    istft,
    mean_periodogram,
    peak_normalize,
    stft,
)
from .metrics import seg_snr

PROXY_BAND = BandSpec(2000.0, 8000.0)
BASELINE_NOISE_S = 0.25
# windows whose bird-band score is within this of the minimum count as tied
SCORE_TIE_TOL = 0.01


class Method(str, enum.Enum):
    MABE = "MABE"
    SPECSUB = "SpecSub"
    MMSE_STSA = "MmseStsa"
    MMSE_LSA = "MmseLsa"


class NoiseSource(str, enum.Enum):
    INITIAL_FRAMES = "InitialFrames"
    REFERENCE_FRAGMENT = "ReferenceFragment"


@dataclass(frozen=True)
class NoisePsdEstimate:
    psd: np.ndarray
    source: NoiseSource = NoiseSource.REFERENCE_FRAGMENT

    def __post_init__(self):
        if np.any(self.psd < 0):
            raise ValueError("noise PSD must be non-negative")


@dataclass(frozen=True)
class MabeConfig:
    bands: tuple[BandSpec, ...] = PAPER_BANDS
    weight_floor: float = 0.1
    alpha_min: float = 1.0
    alpha_max: float = 3.0
    snr_lo_db: float = 0.0
    snr_hi_db: float = 20.0
    noise_win_s: float = 0.5
    noise_hop_s: float = 0.25
    spectral_floor_beta: float = 0.01
    normalize_ceiling: float = 0.99
    stft: StftParams = field(default_factory=StftParams)

    def __post_init__(self):
        object.__setattr__(self, "bands", tuple(
            b if isinstance(b, BandSpec) else BandSpec(*b) for b in self.bands))
        if not self.bands:
            raise ValueError("at least one band is required")
        if self.alpha_min > self.alpha_max:
            raise ValueError("alpha_min must not exceed alpha_max")
        if not 0 < self.spectral_floor_beta < 1:
            raise ValueError("spectral_floor_beta must be in (0, 1)")
        if self.noise_hop_s > self.noise_win_s:
            raise ValueError("noise_hop_s must not exceed noise_win_s")
        if self.snr_lo_db >= self.snr_hi_db:
            raise ValueError("snr_lo_db must be below snr_hi_db")

    @property
    def bird_range(self) -> tuple[float, float]:
        return min(b.f_low for b in self.bands), max(b.f_high for b in self.bands)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("bands", "stft")}
        d["bands"] = [[b.f_low, b.f_high] for b in self.bands]
        d["stft"] = {"fft_size": self.stft.fft_size, "hop": self.stft.hop,
                     "window": self.stft.window}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MabeConfig":
        d = dict(d)
        if "bands" in d:
            d["bands"] = tuple(BandSpec(*b) for b in d["bands"])
        if "stft" in d:
            d["stft"] = StftParams(**d["stft"])
        return cls(**d)


@dataclass(frozen=True)
class EnhancementResult:
    enhanced: Waveform
    method: Method
    band_weights: tuple[tuple[BandSpec, float], ...] = ()
    snr_est_db: float | None = None
    alpha_prime: float | None = None
    noise_ref_span: tuple[int, int] | None = None
    notes: tuple[str, ...] = ()

    def normalized_weights(self) -> np.ndarray:
        w = np.array([wt for _, wt in self.band_weights])
        return w / w.sum()

    def diagnostics(self) -> dict:
        return {
            "method": self.method.value,
            "band_weights": [
                {"band": [b.f_low, b.f_high], "weight": wt} for b, wt in self.band_weights],
            "snr_est_db": self.snr_est_db,
            "alpha_prime": self.alpha_prime,
            "noise_ref_span": list(self.noise_ref_span) if self.noise_ref_span else None,
            "notes": list(self.notes),
        }


# ------------------------------------------------------------------ proxy split

def split_signal_noise_proxy(x: Waveform) -> tuple[Waveform, Waveform]:
    """Signal = 2-8 kHz band-pass of ``x``; noise = the remainder."""
    s = bandpass_filter(x, PROXY_BAND)
    return s, x.with_samples(x.samples - s.samples)


# --------------------------------------------------------------- MABE building blocks

def spectral_flatness(power: np.ndarray) -> float:
    """Geometric over arithmetic mean; 1 by convention for an all-zero spectrum."""
    am = power.mean()
    if am <= 0:
        return 1.0
    gm = math.exp(np.mean(np.log(np.maximum(power, am * 1e-300))))
    return float(min(gm / am, 1.0))


def band_flatness(b: Waveform, band: BandSpec, params: StftParams = StftParams()) -> float:
    psd = mean_periodogram(b, params)
    f = np.fft.rfftfreq(params.fft_size, 1.0 / b.sample_rate)
    sel = (f >= band.f_low) & (f <= band.f_high)
    return spectral_flatness(psd[sel])


def adaptive_weight(b_i: Waveform, x: Waveform, band: BandSpec, weight_floor: float = 0.1,
                    params: StftParams = StftParams()) -> float:
    """Energy share of the band, floored, times a tonality bonus of (1 + (1 - flatness))."""
    if len(b_i) != len(x):
        raise ValueError("band signal and input differ in length")
    ex = x.energy()
    if ex <= 0:
        return float(weight_floor)
    frac = b_i.energy() / ex
    sf = band_flatness(b_i, band, params)
    return float(max(weight_floor, frac) * (1.0 + (1.0 - sf)))


def reconstruct_weighted(x: Waveform, bands, weights) -> tuple[Waveform, Waveform]:
    """Convex combination of the band signals, and the residual x - s_est."""
    w = np.asarray(weights, dtype=np.float64)
    if len(bands) != w.size or w.size == 0:
        raise ValueError("need one weight per band")
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative with a positive sum")
    w = w / w.sum()
    s = np.zeros(len(x))
    for wi, b in zip(w, bands):
        if len(b) != len(x):
            raise ValueError("band signal and input differ in length")
        s += wi * b.samples
    return x.with_samples(s), x.with_samples(x.samples - s)


def adapt_strength(snr_est_db: float, cfg: MabeConfig = MabeConfig()) -> float:
    """Over-subtraction factor: alpha_max at or below snr_lo_db, alpha_min at or above snr_hi_db."""
    if not math.isfinite(snr_est_db):
        raise ValueError("snr_est_db must be finite")
    if snr_est_db <= cfg.snr_lo_db:
        return cfg.alpha_max
    if snr_est_db >= cfg.snr_hi_db:
        return cfg.alpha_min
    t = (snr_est_db - cfg.snr_lo_db) / (cfg.snr_hi_db - cfg.snr_lo_db)
    return cfg.alpha_max + t * (cfg.alpha_min - cfg.alpha_max)


def window_scores(r: Waveform, cfg: MabeConfig = MabeConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Start samples of the candidate noise windows and their bird-band energy fraction."""
    sr = r.sample_rate
    win = int(round(cfg.noise_win_s * sr))
    hop = int(round(cfg.noise_hop_s * sr))
    starts = np.arange(0, len(r) - win + 1, hop)
    lo, hi = cfg.bird_range
    f = np.fft.rfftfreq(win, 1.0 / sr)
    sel = (f >= lo) & (f <= hi)
    taper = np.hanning(win)
    scores = np.empty(starts.size)
    for i, s0 in enumerate(starts):
        spec = np.fft.rfft(r.samples[s0:s0 + win] * taper)
        p = spec.real**2 + spec.imag**2
        tot = p.sum()
        scores[i] = p[sel].sum() / tot if tot > 0 else 0.0
    return starts, scores


def select_noise_reference(r_rn: Waveform, cfg: MabeConfig = MabeConfig()
                           ) -> tuple[tuple[int, int], Waveform]:
    """Pick the residual window with the least energy share in the bird bands.

    Near-ties (within ``SCORE_TIE_TOL``) go to the earliest window. A residual
    shorter than one window is returned whole.
    """
    win = int(round(cfg.noise_win_s * r_rn.sample_rate))
    if len(r_rn) < win:
        return (0, len(r_rn)), r_rn
    starts, scores = window_scores(r_rn, cfg)
    best = int(np.flatnonzero(scores <= scores.min() + SCORE_TIE_TOL)[0])
    s0 = int(starts[best])
    return (s0, s0 + win), r_rn.with_samples(r_rn.samples[s0:s0 + win])


def subtraction_gain(power: np.ndarray, noise_psd: np.ndarray, alpha: float,
                     beta: float) -> np.ndarray:
    """Magnitude gain realising |S|^2 = max(|X|^2 - alpha * P, beta * |X|^2)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(power > 0, 1.0 - alpha * noise_psd / power, 1.0)
    return np.sqrt(np.maximum(g2, beta))


def spectral_subtract(target: Waveform, noise_psd: NoisePsdEstimate, alpha: float,
                      beta: float = 0.01, params: StftParams = StftParams()) -> Waveform:
    spec = stft(target, params)
    psd = np.asarray(noise_psd.psd)
    if psd.shape != (params.n_bins,):
        raise ValueError(f"noise PSD has {psd.shape} bins, STFT has {params.n_bins}")
    gain = subtraction_gain(spec.power, psd, alpha, beta)
    return istft(spec.with_frames(spec.frames * gain))


def mabe_enhance(x: Waveform, cfg: MabeConfig = MabeConfig()) -> EnhancementResult:
    """Run the full multi-band adaptive enhancement on one clip."""
    if len(x) < cfg.stft.fft_size:
        raise AudioError(f"clip of {len(x)} samples shorter than fft_size {cfg.stft.fft_size}")
    for band in cfg.bands:
        band.check(x.sample_rate)
    band_sigs = [bandpass_filter(x, band) for band in cfg.bands]
    weights = [adaptive_weight(b, x, band, cfg.weight_floor, cfg.stft)
               for b, band in zip(band_sigs, cfg.bands)]
    s_est, r_rn = reconstruct_weighted(x, band_sigs, weights)

    snr_est = seg_snr(s_est, r_rn, frame_len=min(1024, len(x)))
    alpha = adapt_strength(snr_est, cfg)
    span, n_ref = select_noise_reference(r_rn, cfg)
    psd = NoisePsdEstimate(mean_periodogram(n_ref, cfg.stft), NoiseSource.REFERENCE_FRAGMENT)
    r_clean = spectral_subtract(r_rn, psd, alpha, cfg.spectral_floor_beta, cfg.stft)

    x_enh = peak_normalize(x.with_samples(s_est.samples + r_clean.samples), cfg.normalize_ceiling)
    return EnhancementResult(
        enhanced=x_enh,
        method=Method.MABE,
        band_weights=tuple(zip(cfg.bands, weights)),
        snr_est_db=snr_est,
        alpha_prime=alpha,
        noise_ref_span=span,
    )


# -------------------------------------------------------------------- baselines

def initial_noise_psd(x: Waveform, params: StftParams = StftParams(),
                      seconds: float = BASELINE_NOISE_S) -> tuple[NoisePsdEstimate, int, bool]:
    n = int(round(seconds * x.sample_rate))
    degenerate = len(x) < n
    n = min(n, len(x))
    head = x.with_samples(x.samples[:n])
    return NoisePsdEstimate(mean_periodogram(head, params), NoiseSource.INITIAL_FRAMES), n, degenerate


def specsub_baseline(x: Waveform, alpha: float = 2.0, beta: float = 0.01,
                     params: StftParams = StftParams()) -> EnhancementResult:
    """Full-spectrum power spectral subtraction with an initial-silence noise estimate."""
    psd, n, degenerate = initial_noise_psd(x, params)
    y = spectral_subtract(x, psd, alpha, beta, params)
    notes = ("clip shorter than noise lead-in; whole clip used as noise estimate",) if degenerate else ()
    return EnhancementResult(y, Method.SPECSUB, alpha_prime=alpha, noise_ref_span=(0, n),
                             notes=notes)


def stsa_gain(xi, gamma):
    """Ephraim-Malah MMSE short-time spectral amplitude gain.

    ``xi`` is the a-priori and ``gamma`` the a-posteriori SNR (linear). The
    exponentially scaled Bessel functions keep large arguments finite.
    """
    xi = np.asarray(xi, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    nu = xi / (1.0 + xi) * gamma
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = (math.sqrt(math.pi) / 2.0) * (np.sqrt(nu) / gamma) * (
            (1.0 + nu) * i0e(nu / 2.0) + nu * i1e(nu / 2.0))
    wiener = xi / (1.0 + xi)
    return np.where(np.isfinite(g), g, wiener)


def lsa_gain(xi, gamma):
    """Ephraim-Malah MMSE log-spectral amplitude gain."""
    xi = np.asarray(xi, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    nu = xi / (1.0 + xi) * gamma
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = xi / (1.0 + xi) * np.exp(0.5 * exp1(nu))
    wiener = xi / (1.0 + xi)
    return np.where(np.isfinite(g), g, wiener)


def mmse_enhance(x: Waveform, mode: str = "STSA", smoothing: float = 0.98,
                 xi_floor_db: float = -25.0, gain_limits: tuple[float, float] = (1e-3, 1.0),
                 params: StftParams = StftParams()) -> EnhancementResult:
    """MMSE-STSA or MMSE-LSA with decision-directed a-priori SNR."""
    mode = mode.upper()
    if mode not in ("STSA", "LSA"):
        raise ValueError(f"mode must be STSA or LSA, got {mode!r}")
    gain_fn = stsa_gain if mode == "STSA" else lsa_gain
    noise, n, degenerate = initial_noise_psd(x, params)
    lam = np.maximum(noise.psd, 1e-20)
    spec = stft(x, params)
    power = spec.power
    xi_min = 10.0 ** (xi_floor_db / 10.0)
    gains = np.empty_like(power)
    prev_amp2 = None
    for t in range(power.shape[0]):
        gamma = power[t] / lam
        inst = np.maximum(gamma - 1.0, 0.0)
        if prev_amp2 is None:
            xi = smoothing + (1.0 - smoothing) * inst
        else:
            xi = smoothing * prev_amp2 / lam + (1.0 - smoothing) * inst
        xi = np.maximum(xi, xi_min)
        g = np.clip(gain_fn(xi, gamma), *gain_limits)
        gains[t] = g
        prev_amp2 = g**2 * power[t]
    y = istft(spec.with_frames(spec.frames * gains))
    method = Method.MMSE_STSA if mode == "STSA" else Method.MMSE_LSA
    notes = ("clip shorter than noise lead-in; whole clip used as noise estimate",) if degenerate else ()
    return EnhancementResult(y, method, noise_ref_span=(0, n), notes=notes)


def enhance(x: Waveform, method: Method | str, cfg: MabeConfig = MabeConfig()) -> EnhancementResult:
    method = Method(method)
    if method is Method.MABE:
        return mabe_enhance(x, cfg)
    if method is Method.SPECSUB:
        return specsub_baseline(x, beta=cfg.spectral_floor_beta, params=cfg.stft)
    mode = "STSA" if method is Method.MMSE_STSA else "LSA"
    return mmse_enhance(x, mode, params=cfg.stft)
