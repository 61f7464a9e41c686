"""Log mel filterbank front-end on a non-overlapping 20 ms grid."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

SAMPLE_RATE = 16000
FRAME_MS = 20
FRAME_SAMPLES = SAMPLE_RATE * FRAME_MS // 1000  # 320
N_FFT = 512
N_MELS = 64
LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int = N_MELS, fmin: float = 0.0, fmax: float = SAMPLE_RATE / 2) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


@lru_cache(maxsize=8)
def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sample_rate: int = SAMPLE_RATE,
    fmin: float = 0.0,
    fmax: float | None = None,
) -> np.ndarray:
    """(n_mels, n_fft // 2 + 1) triangular filters with unit peak, HTK mel scale."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lower) / (center - lower)
    falling = (upper - bins) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def num_frames(n_samples: int) -> int:
    return n_samples // FRAME_SAMPLES


def frame_signal(samples: np.ndarray) -> np.ndarray:
    n = num_frames(len(samples))
    return np.asarray(samples[: n * FRAME_SAMPLES], dtype=np.float64).reshape(n, FRAME_SAMPLES)


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    window = np.hanning(FRAME_SAMPLES + 1)[:-1]  # periodic Hann
    spec = np.fft.rfft(frames * window, n=N_FFT, axis=1)
    return spec.real**2 + spec.imag**2


def extract_features(samples, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """(T, 64) log mel energies, T = floor(len / 320)."""
    if sample_rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz audio, got {sample_rate}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected mono samples, got shape {x.shape}")
    if len(x) < FRAME_SAMPLES:
        raise ValueError(f"waveform has {len(x)} samples, shorter than one {FRAME_MS} ms frame")
    energies = power_spectrum(frame_signal(x)) @ mel_filterbank().T
    return np.log(np.maximum(energies, LOG_FLOOR))


def write_feature_csv(path, features: np.ndarray) -> None:
    np.savetxt(path, features, delimiter=",", fmt="%.10g")
