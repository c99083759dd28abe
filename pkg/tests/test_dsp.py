import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile
from scipy.signal import firwin

from biobench.dsp import (
    PAPER_BANDS,
    AudioError,
    BandSpec,
    SpectralFrames,
    StftParams,
    Waveform,
    bandpass_filter,
    design_bandpass,
    fir_response_db,
    frame_signal,
    istft,
    peak_normalize,
    read_wav,
    stft,
    write_wav,
)

from conftest import rms_db, tone

SR = 22050


# ------------------------------------------------------------------ Waveform

def test_waveform_rejects_bad_input():
    with pytest.raises(AudioError):
        Waveform(np.array([]))
    with pytest.raises(AudioError):
        Waveform(np.array([0.0, np.nan]))
    with pytest.raises(AudioError):
        Waveform(np.zeros(4), 0)


# ------------------------------------------------------------------------ WAV

def test_read_two_second_clip(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, SR, np.zeros(2 * SR, dtype=np.int16))
    w = read_wav(p)
    assert len(w) == 44100 and w.sample_rate == SR
    assert not np.any(w.samples)


def test_read_full_scale_negative(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, SR, np.array([-32768, 0, 32767], dtype=np.int16))
    assert read_wav(p).samples[0] == -1.0


@pytest.mark.parametrize("dtype,scale", [(np.uint8, None), (np.int32, 2**31), (np.float32, 1.0)])
def test_read_other_encodings(tmp_path, dtype, scale):
    p = tmp_path / "a.wav"
    if dtype is np.uint8:
        data = np.array([0, 128, 255], dtype=np.uint8)
        expect = (data.astype(float) - 128) / 128
    else:
        expect = np.array([-0.5, 0.0, 0.25])
        data = (expect * scale).astype(dtype)
    wavfile.write(p, SR, data)
    np.testing.assert_allclose(read_wav(p).samples, expect, atol=1e-9)


def test_read_stereo_averaged(tmp_path):
    p = tmp_path / "s.wav"
    data = np.array([[16384, 0], [-16384, -16384]], dtype=np.int16)
    wavfile.write(p, SR, data)
    np.testing.assert_allclose(read_wav(p).samples, [0.25, -0.5])


def test_read_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "missing.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wav file at all")
    with pytest.raises(AudioError):
        read_wav(bad)
    empty = tmp_path / "empty.wav"
    wavfile.write(empty, SR, np.zeros(0, dtype=np.int16))
    with pytest.raises(AudioError):
        read_wav(empty)


def test_other_rate_warns(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, 16000, np.zeros(100, dtype=np.int16))
    with pytest.warns(UserWarning, match="not resampled"):
        assert read_wav(p).sample_rate == 16000


def test_wav_roundtrip_within_lsb(tmp_path):
    w = tone(440, amp=0.8)
    p = tmp_path / "t.wav"
    assert write_wav(p, w) == 0
    back = read_wav(p)
    assert np.max(np.abs(back.samples - w.samples)) <= 2**-15


def test_write_clips_and_counts(tmp_path):
    p = tmp_path / "c.wav"
    with pytest.warns(UserWarning, match="clipped"):
        n = write_wav(p, Waveform(np.array([1.5, 0.0, -0.5])))
    assert n == 1
    _, data = wavfile.read(p)
    assert data[0] == 32767 and data.dtype == np.int16


def test_write_empty_fails(tmp_path):
    p = tmp_path / "e.wav"
    with pytest.raises(AudioError):
        write_wav(p, np.array([]))
    assert not p.exists()


# -------------------------------------------------------------------- framing

def test_frame_counts():
    assert frame_signal(np.zeros(44100), 1024, 1024).shape == (43, 1024)
    assert frame_signal(np.zeros(1024), 1024, 256).shape == (1, 1024)
    assert frame_signal(np.zeros(1000), 1024, 256).shape == (0, 1024)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3000), st.integers(1, 400), st.integers(1, 400))
def test_frame_count_matches_enumeration(length, frame_len, hop):
    x = np.arange(length, dtype=float)
    frames = frame_signal(x, frame_len, hop)
    starts = []
    s = 0
    while s + frame_len <= length:
        starts.append(s)
        s += hop
    assert frames.shape[0] == len(starts)
    for i, s in enumerate(starts):
        np.testing.assert_array_equal(frames[i], x[s:s + frame_len])


# ----------------------------------------------------------------------- STFT

def test_stft_params_validation():
    with pytest.raises(ValueError):
        StftParams(fft_size=1000)
    with pytest.raises(ValueError):
        StftParams(hop=2048)
    with pytest.raises(ValueError):
        StftParams(hop=300)  # Hann^2 not COLA at this hop


def test_stft_bin_aligned_tone():
    s = stft(tone(100 * SR / 1024))
    assert s.frames.shape[1] == 513
    interior = s.power[4:-4]
    assert np.all(np.argmax(interior, axis=1) == 100)


def test_stft_zero_and_dc():
    assert not np.any(stft(Waveform(np.zeros(4096))).frames)
    p = stft(Waveform(np.full(8192, 0.3))).power[4:-4]
    assert np.all(np.argmax(p, axis=1) == 0)
    assert np.all(p[:, 0] > 0.7 * p.sum(axis=1))


def test_stft_too_short():
    with pytest.raises(AudioError):
        stft(Waveform(np.ones(100)))


@pytest.mark.parametrize("n", [4096, 44100, 10000])
def test_stft_roundtrip(rng, n):
    w = Waveform(rng.standard_normal(n))
    back = istft(stft(w))
    assert len(back) == n
    inner = slice(1024, n - 1024)
    err = np.linalg.norm(back.samples[inner] - w.samples[inner]) / np.linalg.norm(w.samples[inner])
    assert err <= 1e-3
    # centered padding covers the edges as well
    assert np.linalg.norm(back.samples - w.samples) / np.linalg.norm(w.samples) <= 1e-3


def test_istft_zero_frame_and_linearity(rng):
    p = StftParams()
    z = SpectralFrames(np.zeros((1, 513), complex), p, 512)
    assert not np.any(istft(z).samples)
    w = Waveform(rng.standard_normal(8192))
    s = stft(w)
    doubled = istft(s.with_frames(2 * s.frames))
    np.testing.assert_allclose(doubled.samples, 2 * istft(s).samples, atol=1e-12)


def test_istft_rejects_bad_width():
    with pytest.raises(ValueError):
        SpectralFrames(np.zeros((3, 100), complex), StftParams(), 100)


def test_stft_deterministic(rng):
    w = Waveform(rng.standard_normal(5000))
    assert np.array_equal(stft(w).frames, stft(w).frames)


# ------------------------------------------------------------------- bandpass

@pytest.mark.parametrize("band", PAPER_BANDS[:3])
def test_design_matches_scipy_firwin(band):
    ref = firwin(511, [band.f_low, band.f_high], pass_zero=False, window="hamming", fs=SR)
    np.testing.assert_allclose(design_bandpass(band.f_low, band.f_high, SR), ref, atol=1e-12)


def test_design_near_nyquist_becomes_highpass():
    h = design_bandpass(7000.0, 11000.0, SR)
    ref = firwin(511, 7000.0, pass_zero=False, window="hamming", fs=SR)
    np.testing.assert_allclose(h, ref, rtol=1e-3, atol=1e-6)
    assert fir_response_db(h, [SR / 2], SR)[0] > -0.1


def test_bandpass_tone_examples():
    x = tone(2250, amp=0.5)
    y = bandpass_filter(x, BandSpec(1500, 3000))
    assert len(y) == len(x)
    assert abs(rms_db(y.samples, x.samples)) <= 1.0
    low = tone(300, amp=0.5)
    inner = slice(600, -600)
    yl = bandpass_filter(low, BandSpec(1500, 3000))
    assert rms_db(yl.samples[inner], low.samples[inner]) <= -40
    assert not np.any(bandpass_filter(Waveform(np.zeros(2000)), BandSpec(1500, 3000)).samples)


def test_bandpass_rejects_nyquist():
    with pytest.raises(ValueError):
        bandpass_filter(tone(1000), BandSpec(5000, 12000))


@pytest.mark.parametrize("band", PAPER_BANDS)
def test_bandpass_swept_response_matches_design(band):
    h = design_bandpass(band.f_low, band.f_high, SR)
    freqs = [band.f_low, band.f_high, band.center, band.f_low / 2]
    if band.f_high * 2 < SR / 2:
        freqs.append(band.f_high * 2)
    inner = slice(1000, -1000)
    for f in freqs:
        if f >= SR / 2:
            continue
        x = tone(f, amp=0.5)
        measured = rms_db(bandpass_filter(x, band).samples[inner], x.samples[inner])
        designed = fir_response_db(h, [f], SR)[0]
        assert abs(measured - designed) <= 0.5, (f, measured, designed)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_bandpass_linear(a, b, seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(3000), r.standard_normal(3000)
    band = PAPER_BANDS[1]
    lhs = bandpass_filter(Waveform(a * x + b * y), band).samples
    rhs = a * bandpass_filter(Waveform(x), band).samples + b * bandpass_filter(Waveform(y), band).samples
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_bandpass_short_input_and_determinism(rng):
    x = Waveform(rng.standard_normal(100))
    y1 = bandpass_filter(x, PAPER_BANDS[0])
    assert len(y1) == 100
    assert np.array_equal(y1.samples, bandpass_filter(x, PAPER_BANDS[0]).samples)


# ------------------------------------------------------------------ normalize

def test_peak_normalize():
    x = Waveform(np.array([0.2, -1.8, 0.9]))
    y = peak_normalize(x, 0.99)
    assert np.max(np.abs(y.samples)) == pytest.approx(0.99, abs=1e-15)
    np.testing.assert_allclose(y.samples, x.samples * 0.55)
    q = Waveform(np.array([0.4, -0.1]))
    assert peak_normalize(q, 0.99) is q
    z = Waveform(np.zeros(5))
    assert not np.any(peak_normalize(z).samples)
    with pytest.raises(ValueError):
        peak_normalize(q, 1.5)


def test_no_warnings_on_normal_write(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        write_wav(tmp_path / "q.wav", tone(1000, amp=0.5))
