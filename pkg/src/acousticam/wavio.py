"""Multichannel RIFF WAV input/output.

Accepts PCM 16-bit and IEEE float 32-bit files; everything is handled as
(samples, channels) float64 in [-1, 1] scale internally.
"""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

__all__ = ["read_wav", "write_wav"]


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file into ((samples, channels) float64, sample_rate).

    Raises ValueError for sample formats other than int16 or float32.
    """
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        scaled = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        scaled = data.astype(np.float64)
    else:
        raise ValueError(
            f"{path}: unsupported WAV sample format {data.dtype}; "
            f"expected PCM 16-bit or IEEE float 32-bit"
        )
    if scaled.ndim == 1:
        scaled = scaled[:, None]
    return scaled, int(rate)


def write_wav(path, data: np.ndarray, sample_rate: int, pcm16: bool = False) -> None:
    """Write (samples, channels) audio as float32 WAV (or PCM16 if asked).

    PCM16 output clips to [-1, 1) before quantizing.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] < data.shape[1]:
        raise ValueError("data must be (samples, channels)")
    if pcm16:
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, int(sample_rate), (clipped * 32768.0).astype(np.int16))
    else:
        wavfile.write(path, int(sample_rate), data.astype(np.float32))
