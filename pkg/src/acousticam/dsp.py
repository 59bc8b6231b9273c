"""Frame spectra, phase-transform cross-spectra and GCC-PHAT delay estimation.

Conventions used throughout (they must all agree for the imaging chain to
place energy at the right pixel):

* A frame of M channels is windowed and transformed with a real-input DFT;
  only bins 0..N/2 are kept.
* The phase-transform cross-spectrum for pair (i, j) is
  ``X_i(f) * conj(X_j(f))`` normalized to unit magnitude.  If channel j is
  a circularly delayed copy of channel i by d samples, this equals
  ``exp(+2j*pi*f*d/N)``.
* The GCC-PHAT delay for pair (i, j) is the lag of the correlation peak of
  the inverse-transformed cross-spectrum.  It equals arrival_time(i) -
  arrival_time(j) in samples, i.e. it is positive when the sound reaches
  microphone j first, the same sign as
  :meth:`acousticam.geometry.ArrayGeometry.source_tdoas`.

Bins where ``|X_i * X_j|`` falls below a small guard are zeroed instead of
normalized, so silence produces zero cross-spectra rather than noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FrameSpectra",
    "CalibrationIncompleteError",
    "make_window",
    "stft_frame",
    "iter_frames",
    "phat_supervector",
    "gcc_phat_tdoa",
    "measure_targets",
]

# Guard on |X_i(f) X_j(f)| below which a cross-spectrum bin is set to 0.
SILENCE_EPS = 1e-12


class CalibrationIncompleteError(RuntimeError):
    """Fewer sound segments detected than calibration targets expected."""


def make_window(kind: str, frame_size: int) -> np.ndarray:
    """Analysis window: 'hann' (periodic) or 'rect'."""
    if kind in ("rect", "rectangular", "boxcar"):
        return np.ones(frame_size)
    if kind == "hann":
        n = np.arange(frame_size)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / frame_size)
    raise ValueError(f"unknown window {kind!r}")


@dataclass(frozen=True, eq=False)
class FrameSpectra:
    """Per-channel half spectra of one analysis frame.

    spectra : complex ndarray, shape (M, N/2 + 1)
    frame_size : int, the N the spectra came from (even, >= 8)
    """

    spectra: np.ndarray
    frame_size: int

    def __post_init__(self):
        if self.frame_size < 8 or self.frame_size % 2 != 0:
            raise ValueError("frame_size must be even and at least 8")
        spectra = np.atleast_2d(np.asarray(self.spectra, dtype=complex))
        if spectra.shape[1] != self.frame_size // 2 + 1:
            raise ValueError(
                f"expected {self.frame_size // 2 + 1} bins per channel, "
                f"got {spectra.shape[1]}"
            )
        object.__setattr__(self, "spectra", spectra)

    @property
    def n_channels(self) -> int:
        return self.spectra.shape[0]

    @property
    def n_bins(self) -> int:
        return self.spectra.shape[1]


def stft_frame(block: np.ndarray, window: str = "hann") -> FrameSpectra:
    """Window one M-channel block and take the real-input DFT per channel.

    Parameters
    ----------
    block : ndarray, shape (M, N) or (N,)
        Fully populated time-domain samples.
    window : str
        'hann' (default) or 'rect'.
    """
    block = np.atleast_2d(np.asarray(block, dtype=float))
    n = block.shape[1]
    if not np.all(np.isfinite(block)):
        raise ValueError("frame contains NaN or infinite samples")
    w = make_window(window, n)
    return FrameSpectra(np.fft.rfft(block * w, axis=1), n)


def iter_frames(audio: np.ndarray, frame_size: int, hop: int | None = None):
    """Yield successive (start, (M, N) block) views over (S, M) audio."""
    audio = np.atleast_2d(np.asarray(audio, dtype=float))
    if audio.shape[0] < audio.shape[1]:
        raise ValueError("audio must be (samples, channels) with samples >= channels")
    hop = frame_size if hop is None else hop
    if hop < 1:
        raise ValueError("hop must be positive")
    for start in range(0, audio.shape[0] - frame_size + 1, hop):
        yield start, audio[start : start + frame_size, :].T


def phat_supervector(frames: FrameSpectra) -> np.ndarray:
    """Concatenated unit-magnitude cross-spectra over all mic pairs.

    Layout: pair-major then frequency-minor, canonical pair order: entry
    ``p*(N/2+1) + f`` holds pair p at bin f.  Bins whose raw cross power is
    below the silence guard are exactly 0.

    Returns
    -------
    complex ndarray, shape (P * (N/2 + 1),)
    """
    from .geometry import mic_pairs

    spectra = frames.spectra
    pairs = mic_pairs(frames.n_channels)
    out = np.empty(len(pairs) * frames.n_bins, dtype=complex)
    nf = frames.n_bins
    for p, (i, j) in enumerate(pairs):
        cross = spectra[i] * np.conj(spectra[j])
        mag = np.abs(cross)
        out[p * nf : (p + 1) * nf] = np.where(
            mag > SILENCE_EPS, cross / np.maximum(mag, SILENCE_EPS), 0.0
        )
    return out


def _phat_cross(frames: FrameSpectra, pair: tuple[int, int]) -> np.ndarray:
    i, j = pair
    cross = frames.spectra[i] * np.conj(frames.spectra[j])
    mag = np.abs(cross)
    return np.where(mag > SILENCE_EPS, cross / np.maximum(mag, SILENCE_EPS), 0.0)


def gcc_phat_tdoa(
    frames: FrameSpectra,
    pair: tuple[int, int],
    max_lag: float,
    upsample: int = 4,
) -> float:
    """GCC-PHAT delay estimate for one microphone pair, fractional samples.

    The whitened cross-spectrum is inverse-transformed on a lag grid
    refined by ``upsample`` (the plain integer-lag grid biases the
    3-point parabolic peak fit by up to ~0.12 samples, so the correlation
    is oversampled before refinement).  The peak is searched over lags in
    [-ceil(max_lag), +ceil(max_lag)] and polished with a parabolic fit.

    Positive result: sound reached microphone pair[1] first.

    Raises
    ------
    ValueError
        If max_lag >= N/2 (the circular lag window would alias).
    """
    n = frames.frame_size
    if not (0 < max_lag < n / 2):
        raise ValueError(
            f"max_lag must be in (0, N/2) = (0, {n // 2}); got {max_lag} "
            f"(longer delays alias in the circular correlation)"
        )
    if upsample < 1:
        raise ValueError("upsample must be >= 1")
    cross = _phat_cross(frames, pair)
    n_up = n * upsample
    # zero-padded inverse transform = band-limited lag interpolation
    cc = np.fft.irfft(cross, n_up)
    lag_cap = int(np.ceil(max_lag)) * upsample
    window = np.concatenate([cc[-lag_cap:], cc[: lag_cap + 1]])
    peak = int(np.argmax(window)) - lag_cap
    ym = cc[(peak - 1) % n_up]
    y0 = cc[peak % n_up]
    yp = cc[(peak + 1) % n_up]
    denom = ym - 2.0 * y0 + yp
    shift = 0.5 * (ym - yp) / denom if abs(denom) > 1e-300 else 0.0
    return (peak + shift) / upsample


def measure_targets(
    audio: np.ndarray,
    frame_size: int,
    max_lag: float,
    threshold: float,
    frames_per_target: int = 20,
    expected_targets: int | None = None,
    window: str = "hann",
    upsample: int = 4,
) -> list[np.ndarray]:
    """Detect sound bursts in a recording and measure one P-vector each.

    Frames the stream without overlap and runs an energy detector with
    hysteresis: a segment opens when the frame RMS (over all channels)
    reaches ``threshold`` and closes when it drops below ``threshold / 2``.
    Within each segment, per-pair GCC-PHAT delays are taken on the first
    ``frames_per_target`` frames at or above the on-threshold and reduced
    with a median.

    Parameters
    ----------
    audio : ndarray, shape (S, M)
    frame_size : int
    max_lag : float
        Delay search bound in samples, normally the geometry's max_tdoa().
    threshold : float
        On-threshold for frame RMS; must be positive.
    frames_per_target : int
        Cap on frames contributing to each segment's median.
    expected_targets : int, optional
        When given, raise :class:`CalibrationIncompleteError` if fewer
        segments are detected.

    Returns
    -------
    list of (P,) ndarrays, one per detected segment, in stream order.
    """
    from .geometry import mic_pairs

    if threshold <= 0:
        raise ValueError("detection threshold must be positive")
    audio = np.atleast_2d(np.asarray(audio, dtype=float))
    n_channels = audio.shape[1]
    pairs = mic_pairs(n_channels)
    off_threshold = threshold / 2.0

    segments: list[np.ndarray] = []
    active = False
    collected: list[np.ndarray] = []

    def close_segment():
        nonlocal collected
        if collected:
            segments.append(np.median(np.array(collected), axis=0))
        collected = []

    for _, block in iter_frames(audio, frame_size, frame_size):
        rms = float(np.sqrt(np.mean(block**2)))
        if not active:
            if rms >= threshold:
                active = True
        elif rms < off_threshold:
            active = False
            close_segment()
        if active and rms >= threshold and len(collected) < frames_per_target:
            frames = stft_frame(block, window)
            collected.append(
                np.array(
                    [
                        gcc_phat_tdoa(frames, pr, max_lag, upsample)
                        for pr in pairs
                    ]
                )
            )
    if active:
        close_segment()

    if expected_targets is not None and len(segments) < expected_targets:
        raise CalibrationIncompleteError(
            f"detected {len(segments)} sound segments but {expected_targets} "
            f"calibration targets were expected"
        )
    return segments
