"""Synthetic multichannel recordings for array calibration and testing.

Renders a script of timed source events into an M-channel signal by
applying per-microphone fractional delays in the frequency domain,
following the free-field arrival order of
:meth:`acousticam.geometry.ArrayGeometry.source_tdoas`.  Only relative
delays between channels are rendered (the common propagation delay is
dropped), which is all any pairwise method can observe.

Script format, one event per line, '#' comments allowed:

    white   <x> <y> <z> <duration_s>
    tone    <x> <y> <z> <duration_s> [freq_hz]
    silence <duration_s>

Rendering is deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry

__all__ = ["SourceEvent", "SynthScriptError", "parse_script", "synthesize"]

DEFAULT_TONE_HZ = 1000.0
EDGE_RAMP_S = 0.005


class SynthScriptError(ValueError):
    """Source script line could not be parsed."""


@dataclass(frozen=True)
class SourceEvent:
    kind: str  # 'white', 'tone' or 'silence'
    duration: float  # seconds
    position: tuple[float, float, float] | None = None  # meters; None for silence
    freq: float = DEFAULT_TONE_HZ


def parse_script(path) -> list[SourceEvent]:
    """Parse a source-event script file."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            kind = tokens[0].lower()
            try:
                if kind == "silence":
                    if len(tokens) != 2:
                        raise ValueError("expected 'silence <duration_s>'")
                    events.append(SourceEvent("silence", float(tokens[1])))
                elif kind in ("white", "tone"):
                    if kind == "white" and len(tokens) != 5:
                        raise ValueError("expected 'white x y z duration_s'")
                    if kind == "tone" and len(tokens) not in (5, 6):
                        raise ValueError("expected 'tone x y z duration_s [freq_hz]'")
                    x, y, z, dur = (float(t) for t in tokens[1:5])
                    freq = float(tokens[5]) if len(tokens) == 6 else DEFAULT_TONE_HZ
                    events.append(SourceEvent(kind, dur, (x, y, z), freq))
                else:
                    raise ValueError(f"unknown event kind {kind!r}")
                if events[-1].duration <= 0:
                    raise ValueError("duration must be positive")
            except ValueError as exc:
                raise SynthScriptError(f"{path}:{lineno}: {exc}") from None
    return events


def _mono_source(event: SourceEvent, n: int, sample_rate: float, rng) -> np.ndarray:
    if event.kind == "white":
        sig = rng.standard_normal(n)
    else:
        t = np.arange(n) / sample_rate
        sig = np.sin(2.0 * np.pi * event.freq * t)
    ramp = min(int(EDGE_RAMP_S * sample_rate), n // 2)
    if ramp > 0:
        env = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        sig[:ramp] *= env
        sig[n - ramp :] *= env[::-1]
    return sig


def _delay_channels(sig: np.ndarray, delays: np.ndarray) -> np.ndarray:
    """Apply per-channel fractional delays via a frequency-domain shift.

    Output is cropped to the input length: delays must be small relative
    to the block (true for microphone-array spacings).
    """
    n = len(sig)
    pad = n + int(np.ceil(np.max(delays))) + 64
    spec = np.fft.rfft(sig, pad)
    bins = np.arange(len(spec))
    out = np.empty((n, len(delays)))
    for ch, d in enumerate(delays):
        shifted = spec * np.exp(-2j * np.pi * bins * d / pad)
        out[:, ch] = np.fft.irfft(shifted, pad)[:n]
    return out


def synthesize(
    geometry: ArrayGeometry, events: list[SourceEvent], seed: int = 0
) -> np.ndarray:
    """Render a script into (samples, M) audio at the geometry's rate.

    Each sounding event is generated once, then delayed per channel by its
    free-field arrival offset; silence events advance the timeline with
    exact zeros.
    """
    rng = np.random.default_rng(seed)
    fs = geometry.sample_rate
    blocks = []
    for event in events:
        n = int(round(event.duration * fs))
        if n == 0:
            continue
        if event.kind == "silence":
            blocks.append(np.zeros((n, geometry.n_mics)))
            continue
        src = np.asarray(event.position, dtype=float)
        arrivals = (fs / geometry.speed_of_sound) * np.linalg.norm(
            src[None, :] - geometry.mics, axis=1
        )
        arrivals -= arrivals.min()
        sig = _mono_source(event, n, fs, rng)
        blocks.append(_delay_channels(sig, arrivals))
    if not blocks:
        return np.zeros((0, geometry.n_mics))
    return np.concatenate(blocks, axis=0)
