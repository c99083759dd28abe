import numpy as np
import pytest

from biobench.dsp import DEFAULT_SR, Waveform


def tone(freq, n=44100, amp=1.0, sr=DEFAULT_SR, phase=0.0):
    t = np.arange(n) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t + phase), sr)


def rms_db(a, b):
    """RMS of ``a`` relative to ``b`` in dB."""
    return 20 * np.log10(np.sqrt(np.mean(a**2)) / np.sqrt(np.mean(b**2)))


def dominant_freq(w, n_fft=8192):
    """Peak of the averaged magnitude spectrum, parabolically interpolated."""
    x = w.samples
    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::n_fft // 4] * np.hanning(n_fft)
    mag = np.abs(np.fft.rfft(frames, axis=1)).mean(axis=0)
    k = int(np.argmax(mag))
    a, b, c = np.log(mag[k - 1:k + 2] + 1e-300)
    k = k + 0.5 * (a - c) / (a - 2 * b + c)
    return k * w.sample_rate / n_fft


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion.

    Usage: ``with acceptance(n, title) as rec: ... rec.detail = "..."``.
    The summary is printed at the end of the session.
    """
    store = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    class _Record:
        def __init__(self, n, title):
            self.n, self.title, self.detail = n, title, ""

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            ok = exc_type is None
            if not ok and not self.detail:
                self.detail = str(exc).splitlines()[0] if str(exc) else exc_type.__name__
            store[self.n] = (ok, self.title, self.detail)
            line = f"ACCEPTANCE {self.n:2d} {'PASS' if ok else 'FAIL'}  {self.title}  {self.detail}"
            print(line)
            return False

    return _Record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        ok, title, detail = store[n]
        terminalreporter.write_line(f"{n:2d}. {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
