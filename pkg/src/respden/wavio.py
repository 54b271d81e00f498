"""RIFF WAV reading/writing for the dataset layer.

Decoding is delegated to scipy (PCM 16/24/32-bit and float formats);
samples are returned as float64 in [-1, 1], stereo averaged down to mono.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .errors import DatasetError, MissingAudioError

_PCM_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Read a WAV file as (mono float64 samples in [-1, 1], sample_rate)."""
    if not os.path.exists(path):
        raise MissingAudioError(f"missing WAV file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise DatasetError(f"unreadable WAV file {path}: {exc}") from exc
    if data.ndim == 2:
        data = data.astype(np.float64).mean(axis=1)
    if data.dtype in _PCM_SCALE:
        samples = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    return np.clip(samples, -1.0, 1.0), int(rate)


def write_wav(path: str, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples in [-1, 1] as 16-bit PCM.

    The scale matches the reader (1/32768), so int16-representable
    samples round-trip bitwise.
    """
    scaled = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype(np.int16)
    wavfile.write(path, sample_rate, pcm)
