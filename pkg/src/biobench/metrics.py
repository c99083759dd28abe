"""Objective evaluation measures.

Waveform-level: segmental SNR, proxy SNR improvement, Itakura-Saito distance.
Distribution-level: the 10-descriptor feature vector, per-dimension histogram
JSD, NDB over k-means bins, and the Gaussian Frechet distance used by FAD.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.stats import norm

from .dsp import StftParams, Waveform, frame_signal, stft

SEG_EPS = 1e-10
ISD_FLOOR = 1e-10


def _samples(w) -> np.ndarray:
    return w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)


# ------------------------------------------------------------------------ SegSNR

def segment_energies(s, n, frame_len: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    s = _samples(s)
    n = _samples(n)
    if s.shape != n.shape:
        raise ValueError(f"length mismatch: {s.size} vs {n.size}")
    if s.size < frame_len:
        raise ValueError(f"signal of {s.size} samples shorter than frame_len {frame_len}")
    fs = frame_signal(s, frame_len, frame_len)
    fn = frame_signal(n, frame_len, frame_len)
    return np.einsum("ij,ij->i", fs, fs), np.einsum("ij,ij->i", fn, fn)


def seg_snr(s_est, n_est, frame_len: int = 1024, clamp: tuple[float, float] | None = None,
            active_rel: float | None = None, eps: float = SEG_EPS) -> float:
    """Segmental SNR in dB over non-overlapping frames.

    Parameters
    ----------
    s_est, n_est : Waveform or array
        Signal and noise estimates of equal length.
    frame_len : int
        Frame length in samples; the partial tail frame is ignored.
    clamp : (lo, hi), optional
        Clamp each per-frame value before averaging, e.g. ``(-20, 35)``.
    active_rel : float, optional
        Only average frames whose signal energy exceeds ``active_rel`` times
        the largest frame energy.
    """
    es, en = segment_energies(s_est, n_est, frame_len)
    if active_rel is not None:
        keep = es > active_rel * es.max()
        if not np.any(keep):
            raise ValueError("no active signal frames")
        es, en = es[keep], en[keep]
    per_frame = 10.0 * np.log10(es / (en + eps) + 1e-300)
    if clamp is not None:
        per_frame = np.clip(per_frame, *clamp)
    return float(np.mean(per_frame))


def proxy_seg_snr(x: Waveform, frame_len: int = 1024) -> float:
    from .enhance import split_signal_noise_proxy

    s, n = split_signal_noise_proxy(x)
    return seg_snr(s, n, frame_len)


def snr_improvement(before: Waveform, after: Waveform, frame_len: int = 1024) -> float:
    """Change in proxy SegSNR (2-8 kHz split applied to each waveform)."""
    if len(before) != len(after):
        raise ValueError(f"length mismatch: {len(before)} vs {len(after)}")
    return proxy_seg_snr(after, frame_len) - proxy_seg_snr(before, frame_len)


# ---------------------------------------------------------------------------- ISD

def isd(reference: Waveform, test: Waveform, params: StftParams = StftParams()) -> float:
    """Itakura-Saito distance, averaged over STFT frames and bins.

    Argument order matters: ``reference`` is the original, ``test`` the
    processed signal; per bin the value is r - ln r - 1 with r = P_ref / P_test.
    """
    if len(reference) != len(test):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(test)}")
    pr = np.maximum(stft(reference, params).power, ISD_FLOOR)
    pt = np.maximum(stft(test, params).power, ISD_FLOOR)
    r = pr / pt
    return float(np.mean(r - np.log(r) - 1.0))


# ----------------------------------------------------------------------- features

class FeatureVector(NamedTuple):
    mean_amp: float
    std_amp: float
    max_abs_amp: float
    mean_abs_amp: float
    zcr: float
    mean_mag: float
    std_mag: float
    dom_freq_pos: float
    total_spec_energy: float
    spectral_centroid_hz: float


FEATURE_NAMES = FeatureVector._fields


def zero_crossing_rate(x: np.ndarray) -> float:
    if x.size < 2:
        return 0.0
    neg = x < 0
    return float(np.count_nonzero(neg[1:] != neg[:-1]) / (x.size - 1))


def extract_features(w: Waveform, params: StftParams = StftParams()) -> FeatureVector:
    """Five temporal and five spectral descriptors of one clip.

    The spectral descriptors use the magnitude spectrum averaged over full
    (unpadded) STFT frames; clips shorter than one frame are zero-padded.
    """
    x = w.samples
    absx = np.abs(x)
    temporal = (float(np.mean(x)), float(np.std(x)), float(absx.max()), float(absx.mean()),
                zero_crossing_rate(x))
    if not np.any(x):
        return FeatureVector(*temporal, 0.0, 0.0, 0.0, 0.0, 0.0)
    padded = x if x.size >= params.fft_size else np.pad(x, (0, params.fft_size - x.size))
    frames = frame_signal(padded, params.fft_size, params.hop) * params.get_window()
    mag = np.abs(np.fft.rfft(frames, axis=1)).mean(axis=0)
    freqs = np.fft.rfftfreq(params.fft_size, 1.0 / w.sample_rate)
    total = mag.sum()
    centroid = float(np.dot(freqs, mag) / total) if total > 0 else 0.0
    return FeatureVector(
        *temporal,
        float(mag.mean()),
        float(mag.std()),
        float(np.argmax(mag) / (mag.size - 1)),
        float(np.dot(mag, mag)),
        centroid,
    )


# ---------------------------------------------------------------------------- JSD

@dataclass(frozen=True)
class HistogramSpec:
    bins_per_dim: int = 50
    log_base: float = 2.0

    def __post_init__(self):
        if self.bins_per_dim < 2:
            raise ValueError("bins_per_dim must be >= 2")


def _as_matrix(vectors) -> np.ndarray:
    a = np.asarray(vectors, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError("need a non-empty set of vectors")
    return a


def _kl_counts(c: np.ndarray, n: int, m: np.ndarray, log_base: float) -> float:
    nz = c > 0
    terms = c[nz] * (np.log(c[nz] / n / m[nz]) / math.log(log_base))
    return math.fsum(terms) / n


def histogram_jsd(a: np.ndarray, b: np.ndarray, h: HistogramSpec = HistogramSpec()) -> float:
    """JSD between two 1-D samples histogrammed over their pooled range."""
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if not hi > lo:
        return 0.0
    ca, _ = np.histogram(a, bins=h.bins_per_dim, range=(lo, hi))
    cb, _ = np.histogram(b, bins=h.bins_per_dim, range=(lo, hi))
    m = 0.5 * (ca / a.size + cb / b.size)
    return 0.5 * _kl_counts(ca, a.size, m, h.log_base) + 0.5 * _kl_counts(cb, b.size, m, h.log_base)


def jsd_features(real, gen, h: HistogramSpec = HistogramSpec()) -> float:
    """Mean over dimensions of the per-dimension histogram JSD (base 2 by default)."""
    r = _as_matrix(real)
    g = _as_matrix(gen)
    if r.shape[1] != g.shape[1]:
        raise ValueError("dimension mismatch")
    return math.fsum(histogram_jsd(r[:, d], g[:, d], h) for d in range(r.shape[1])) / r.shape[1]


# ---------------------------------------------------------------------------- NDB

@dataclass(frozen=True)
class NdbResult:
    count: int
    z: np.ndarray
    real_props: np.ndarray
    gen_props: np.ndarray


def ndb_detail(real, gen, k: int = 20, alpha: float = 0.05, seed: int = 0,
               iters: int = 100) -> NdbResult:
    r = _as_matrix(real)
    g = _as_matrix(gen)
    if r.shape[0] < k:
        raise ValueError(f"need at least k={k} real samples, got {r.shape[0]}")
    if r.shape[1] != g.shape[1]:
        raise ValueError("dimension mismatch")
    mu = r.mean(axis=0)
    sd = r.std(axis=0)
    sd[sd == 0] = 1.0
    rz = (r - mu) / sd
    gz = (g - mu) / sd
    centroids, real_lab = kmeans2(rz, k, iter=iters, minit="++", seed=np.random.default_rng(seed),
                                  missing="warn")
    d2 = ((gz[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    gen_lab = np.argmin(d2, axis=1)
    cr = np.bincount(real_lab, minlength=k)
    cg = np.bincount(gen_lab, minlength=k)
    n1, n2 = r.shape[0], g.shape[0]
    p1, p2 = cr / n1, cg / n2
    pooled = (cr + cg) / (n1 + n2)
    se = np.sqrt(pooled * (1 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = np.zeros(k)
    ok = se > 0
    z[ok] = (p1[ok] - p2[ok]) / se[ok]
    thresh = norm.ppf(1 - alpha / 2)
    return NdbResult(int(np.count_nonzero(np.abs(z) > thresh)), z, p1, p2)


def ndb(real, gen, k: int = 20, alpha: float = 0.05, seed: int = 0) -> int:
    """Number of k-means bins (fit on ``real``) whose occupancy differs significantly."""
    return ndb_detail(real, gen, k, alpha, seed).count


# ------------------------------------------------------------------------ Frechet

@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_gaussian(embeddings) -> GaussianFit:
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 2:
        raise ValueError("need a matrix with at least 2 rows")
    cov = np.cov(e, rowvar=False, ddof=1).reshape(e.shape[1], e.shape[1])
    return GaussianFit(e.mean(axis=0), 0.5 * (cov + cov.T))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def frechet_distance(a: GaussianFit, b: GaussianFit) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)."""
    if a.dim != b.dim or a.covariance.shape != b.covariance.shape:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    for arr in (a.mean, b.mean, a.covariance, b.covariance):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite entries in Gaussian fit")
    diff = a.mean - b.mean
    ra = _psd_sqrt(a.covariance)
    inner = ra @ b.covariance @ ra
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    tr_sqrt = np.sum(np.sqrt(np.maximum(vals, 0.0)))
    d = diff @ diff + np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * tr_sqrt
    return float(max(d, 0.0))


# ---------------------------------------------------------------------------- CSV

def read_matrix_csv(path) -> np.ndarray:
    """One vector per row; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no rows")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    return np.array([[float(c) for c in r] for r in rows], dtype=np.float64)


def write_matrix_csv(path, matrix, header: Sequence[str] | None = None) -> None:
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh)
        if header is not None:
            wr.writerow(header)
        for row in np.atleast_2d(np.asarray(matrix, dtype=np.float64)):
            wr.writerow([repr(float(v)) for v in row])
