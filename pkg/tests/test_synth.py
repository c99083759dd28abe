import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biobench.dsp import Waveform
from biobench.synth import (
    PRESETS,
    CallSpec,
    Envelope,
    NoiseKind,
    active_seg_snr,
    gen_call,
    gen_noise,
    make_clip,
    mix_at_segsnr,
    mixup,
    pitch_shift,
    resample_sinc,
    time_stretch,
)

from conftest import dominant_freq, rms_db, tone

SR = 22050


def _band_fraction(x, lo, hi):
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1 / SR)
    return p[(f >= lo) & (f <= hi)].sum() / p.sum()


# ------------------------------------------------------------------ gen_call

def test_constant_call_peaks_at_frequency():
    w = gen_call(CallSpec(3000, 3000, 1, 1, 0.5, 0.1, seed=1))
    assert len(w) == 2 * SR
    assert dominant_freq(w) == pytest.approx(3000, rel=0.021)
    assert np.max(np.abs(w.samples)) == pytest.approx(0.5)


def test_silent_call():
    w = gen_call(CallSpec(3000, 3000, amplitude=0.0))
    assert not np.any(w.samples)


def test_call_deterministic():
    spec = CallSpec(2500, 4000, 2, 3, 0.2, 0.1, Envelope.EXPONENTIAL, seed=9)
    assert np.array_equal(gen_call(spec).samples, gen_call(spec).samples)
    other = CallSpec(2500, 4000, 2, 3, 0.2, 0.1, Envelope.EXPONENTIAL, seed=10)
    assert not np.array_equal(gen_call(spec).samples, gen_call(other).samples)


def test_call_silence_between_syllables():
    w = gen_call(CallSpec(3000, 3000, 1, 2, 0.2, 0.2, seed=0)).samples
    syl = int(0.2 * SR)
    assert not np.any(w[syl:2 * syl])
    assert not np.any(w[3 * syl + syl:])


@pytest.mark.parametrize("i", range(len(PRESETS)))
def test_presets_in_bird_band(i):
    assert _band_fraction(gen_call(PRESETS[i]).samples, 1500, 11000) >= 0.8


@pytest.mark.parametrize("kwargs", [
    dict(f_start=0, f_end=3000),
    dict(f_start=3000, f_end=12000),
    dict(f_start=4000, f_end=4000, n_harmonics=3),
    dict(f_start=3000, f_end=3000, syllable_count=10, syllable_len_s=0.3),
    dict(f_start=3000, f_end=3000, amplitude=1.5),
])
def test_callspec_validation(kwargs):
    with pytest.raises(ValueError):
        CallSpec(**kwargs)


# ----------------------------------------------------------------- gen_noise

def test_white_noise_unit_rms():
    x = gen_noise("White", 44100, seed=1).samples
    assert np.sqrt(np.mean(x**2)) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(x, gen_noise(NoiseKind.WHITE, 44100, seed=1).samples)


def test_pink_noise_slope():
    x = gen_noise("Pink", 2**17, seed=2).samples
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1 / SR)
    octaves = [(250 * 2**k, 500 * 2**k) for k in range(5)]
    levels = [10 * np.log10(np.mean(p[(f >= lo) & (f < hi)])) for lo, hi in octaves]
    slope = np.polyfit(np.arange(5), levels, 1)[0]
    assert slope == pytest.approx(-3.0, abs=1.0)


def test_hum_is_low():
    x = gen_noise("LowHum", 44100, seed=3).samples
    assert _band_fraction(x, 0, 1000) >= 0.9


def test_noise_errors():
    with pytest.raises(ValueError):
        gen_noise("Brown", 100, 0)
    with pytest.raises(ValueError):
        gen_noise("White", 0, 0)


# -------------------------------------------------------------------- mixing

@pytest.mark.parametrize("target", [-10.0, -5.0, 0.0, 5.0, 10.0])
def test_mix_hits_target(target):
    clean = gen_call(CallSpec(3000, 4000, 1, 3, 0.2, 0.2, seed=5))
    noise = gen_noise("Pink", len(clean), seed=6)
    gt = mix_at_segsnr(clean, noise, target)
    assert gt.achieved_segsnr_db == pytest.approx(target, abs=0.1)
    assert active_seg_snr(gt.clean, gt.noise) == pytest.approx(target, abs=0.1)
    np.testing.assert_array_equal(gt.mix.samples, gt.clean.samples + gt.noise.samples)
    s = gt.scaled(0.5)
    assert active_seg_snr(s.clean, s.noise) == pytest.approx(target, abs=1e-6)


def test_mix_errors():
    with pytest.raises(ValueError):
        mix_at_segsnr(Waveform(np.zeros(4096)), Waveform(np.ones(4096)), 0.0)
    with pytest.raises(ValueError):
        mix_at_segsnr(Waveform(np.ones(4096)), Waveform(np.ones(2048)), 0.0)


def test_mixup_endpoints(rng):
    a, b = Waveform(rng.standard_normal(1000)), Waveform(rng.standard_normal(1000))
    assert np.array_equal(mixup(a, b, 1.0).samples, a.samples)
    assert np.array_equal(mixup(a, b, 0.0).samples, b.samples)
    with pytest.raises(ValueError):
        mixup(a, b, 1.2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1))
def test_mixup_energy_bound(seed, lam):
    r = np.random.default_rng(seed)
    a, b = Waveform(r.standard_normal(512)), Waveform(3 * r.standard_normal(512))
    m = mixup(a, b, lam)
    bound = (lam * np.sqrt(a.energy()) + (1 - lam) * np.sqrt(b.energy())) ** 2
    assert m.energy() <= bound * (1 + 1e-12)


def test_make_clip_deterministic_and_bounded():
    a, b = make_clip(4, 77, -5.0), make_clip(4, 77, -5.0)
    assert a.clip_id == "clip_0004" and a.seed == 81
    assert np.array_equal(a.mix.mix.samples, b.mix.mix.samples)
    assert np.max(np.abs(a.mix.mix.samples)) <= 0.95 + 1e-12
    assert active_seg_snr(a.mix.clean, a.mix.noise) == pytest.approx(-5.0, abs=0.1)
    assert a.noise_kind is NoiseKind.PINK


# ---------------------------------------------------------- stretch and shift

@pytest.mark.parametrize("st_, expected", [(12, 4000.0), (-12, 1000.0), (5, 2000 * 2 ** (5 / 12))])
def test_pitch_shift_moves_tone(st_, expected):
    w = tone(2000, amp=0.5)
    out = pitch_shift(w, st_)
    assert len(out) == len(w)
    assert dominant_freq(out) == pytest.approx(expected, rel=0.03)


def test_pitch_shift_zero_is_identity():
    w = tone(2000, amp=0.5)
    out = pitch_shift(w, 0)
    assert rms_db(out.samples - w.samples, w.samples) <= -50


def test_pitch_shift_range():
    with pytest.raises(ValueError):
        pitch_shift(tone(2000), 13)


def test_time_stretch_identity():
    w = tone(3000, amp=0.5)
    out = time_stretch(w, 1.0)
    assert len(out) == len(w)
    assert rms_db(out.samples - w.samples, w.samples) <= -50


@pytest.mark.parametrize("rate", [0.5, 0.8, 1.25, 2.0])
def test_time_stretch_keeps_pitch(rate):
    w = tone(3000, amp=0.5)
    out = time_stretch(w, rate)
    assert len(out) == round(len(w) / rate)
    assert dominant_freq(out) == pytest.approx(3000, rel=0.01)


def test_time_stretch_range():
    with pytest.raises(ValueError):
        time_stretch(tone(3000), 2.5)


def test_resample_sinc_preserves_band_limited_tone():
    n = 8192
    x = np.sin(2 * np.pi * 0.05 * np.arange(n))
    y = resample_sinc(x, n // 2)
    expected = np.sin(2 * np.pi * 0.1 * np.arange(n // 2))
    core = slice(200, n // 2 - 200)
    assert np.max(np.abs(y[core] - expected[core])) < 1e-3


# ---------------------------------------------------------------- augmentation

def test_random_augment_covers_all_kinds():
    from biobench.synth import AUGMENTATIONS, AugmentRanges, random_augment

    w = gen_call(PRESETS[2])
    partner = gen_call(PRESETS[5])
    noise = gen_noise("Pink", len(w), seed=1)
    r = AugmentRanges()
    seen = set()
    for seed in range(40):
        out, rec = random_augment(w, partner, noise, seed)
        seen.add(rec["kind"])
        assert len(out) == len(w)
        lo, hi = {"mixup": r.mixup_lambda, "overlay": r.overlay_db,
                  "pitch": r.semitones, "stretch": r.stretch_rate}[rec["kind"]]
        assert lo <= rec["value"] <= hi
        again, _ = random_augment(w, partner, noise, seed)
        assert np.array_equal(out.samples, again.samples)
    assert seen == set(AUGMENTATIONS)
