"""Figures written next to the tabular reports. Headless (Agg) only."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dsp import stft  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}

METHOD_COLORS = {
    "SpecSub": "#8c8c8c",
    "MmseStsa": "#6a8fb3",
    "MmseLsa": "#3f6d99",
    "MABE": "#c2452d",
}


def save(fig, path):
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_method_comparison(rows, path):
    """Side-by-side bars of SNR improvement and ISD per method.

    ``rows`` holds dicts with keys method, label, snr_mean, snr_std, isd_mean, isd_std.
    """
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        labels = [r["label"] for r in rows]
        colors = [METHOD_COLORS.get(r["method"], "#444444") for r in rows]
        pos = np.arange(len(rows))
        ax1.bar(pos, [r["snr_mean"] for r in rows], yerr=[r["snr_std"] for r in rows],
                color=colors, capsize=3)
        ax1.axhline(0.0, color="k", lw=0.6)
        ax1.set_ylabel("SNR improvement (dB)")
        ax2.bar(pos, [r["isd_mean"] for r in rows], yerr=[r["isd_std"] for r in rows],
                color=colors, capsize=3)
        ax2.set_ylabel("ISD (lower is better)")
        for ax in (ax1, ax2):
            ax.set_xticks(pos)
            ax.set_xticklabels(labels, rotation=20, ha="right")
        fig.tight_layout()
        save(fig, path)


def plot_enhancement(x, result, path):
    """Spectrograms of the input and the enhanced clip, with the analysis bands marked."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.0), sharey=True)
        for ax, w, title in ((axes[0], x, "input"),
                             (axes[1], result.enhanced, result.method.value)):
            s = stft(w)
            db = 10 * np.log10(s.power.T + 1e-10)
            t_end = len(w) / w.sample_rate
            ax.imshow(db, origin="lower", aspect="auto", cmap="magma",
                      extent=(0, t_end, 0, w.sample_rate / 2), vmin=db.max() - 80, vmax=db.max())
            ax.set_title(title)
            ax.set_xlabel("time (s)")
        for band, wt in result.band_weights:
            for f in (band.f_low, band.f_high):
                axes[1].axhline(f, color="w", lw=0.4, alpha=0.6)
        axes[0].set_ylabel("frequency (Hz)")
        fig.tight_layout()
        save(fig, path)
