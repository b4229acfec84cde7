import numpy as np
import pytest

from affectpipe import Modality, TimeSeries


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    results = {}
    for status in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(rep, "when", "call") == "call" or status in ("error", "skipped"):
                results[nodeid.split("::")[-1]] = status.upper()
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(results):
            terminalreporter.write_line(f"{name}: {results[name]}")


@pytest.fixture
def ecg_modality():
    return Modality("ECG", "millivolt", 700.0)


def make_series(values, fs, modality_name="ECG", subject="S1", phase="rest"):
    values = np.asarray(values, dtype=float)
    t = np.arange(values.size) / fs
    return TimeSeries(subject, phase, Modality(modality_name), t, values, fs)


def sine_series(freq_hz, fs, duration_s, amplitude=1.0, **kwargs):
    n = int(duration_s * fs)
    t = np.arange(n) / fs
    return make_series(amplitude * np.sin(2 * np.pi * freq_hz * t), fs, **kwargs)


def fft_gain_db(x_in, x_out, fs, freq_hz):
    """Independent FFT-based oracle: gain at one tone frequency, in dB."""
    n = len(x_in)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    k = int(np.argmin(np.abs(freqs - freq_hz)))
    a_in = np.abs(np.fft.rfft(x_in))[k]
    a_out = np.abs(np.fft.rfft(x_out))[k]
    return 20.0 * np.log10(a_out / a_in)


def rms(x):
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x * x)))
