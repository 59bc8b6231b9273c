"""Microphone array geometry and free-field time-difference-of-arrival maps.

All TDOAs in this package are expressed in fractional samples and follow one
sign convention: for the microphone pair (i, j) with i < j,

    tdoa[i, j] = (sample_rate / speed_of_sound) * (dist(source, mic_i) - dist(source, mic_j))

so a positive value means the wavefront reaches microphone j first.  Every
P-vector of pairwise TDOAs uses the canonical pair order returned by
:func:`mic_pairs` (lexicographic over i < j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ArrayGeometry",
    "mic_pairs",
    "nominal_square_array",
    "load_geometry",
]


def mic_pairs(n_mics: int) -> list[tuple[int, int]]:
    """Canonical microphone pair order: (i, j) with i < j, lexicographic.

    Pair count is M*(M-1)/2; every pairwise quantity in the package is laid
    out in this order.
    """
    return [(i, j) for i in range(n_mics) for j in range(i + 1, n_mics)]


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Planar (or general) microphone array description.

    Parameters
    ----------
    mics : ndarray, shape (M, 3)
        Microphone xyz positions in meters.
    sample_rate : float
        Audio sample rate in samples/second.
    speed_of_sound : float
        Propagation speed in meters/second.
    tdoa_margin : float
        Fractional overestimation applied to the maximum-TDOA bound to
        absorb mismatch between the free-field model and a real rig.
        Default 0.1.
    """

    mics: np.ndarray
    sample_rate: float = 16000.0
    speed_of_sound: float = 343.0
    tdoa_margin: float = 0.1

    def __post_init__(self):
        mics = np.asarray(self.mics, dtype=float)
        if mics.ndim != 2 or mics.shape[1] != 3:
            raise ValueError("mics must be an (M, 3) array of xyz positions")
        if mics.shape[0] < 2:
            raise ValueError("need at least 2 microphones")
        if not np.all(np.isfinite(mics)):
            raise ValueError("microphone positions must be finite")
        diffs = np.linalg.norm(mics[:, None, :] - mics[None, :, :], axis=2)
        if np.max(diffs) == 0.0:
            raise ValueError("at least two microphone positions must be distinct")
        if not (self.sample_rate > 0):
            raise ValueError("sample_rate must be positive")
        if not (self.speed_of_sound > 0):
            raise ValueError("speed_of_sound must be positive")
        if self.tdoa_margin < 0:
            raise ValueError("tdoa_margin must be non-negative")
        object.__setattr__(self, "mics", mics)

    @property
    def n_mics(self) -> int:
        return self.mics.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.n_mics * (self.n_mics - 1) // 2

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return mic_pairs(self.n_mics)

    def max_tdoa(self) -> float:
        """Upper bound on any pairwise TDOA, in samples.

        (1 + tdoa_margin) times the largest inter-microphone spacing
        converted to samples.  Strictly positive.
        """
        diffs = np.linalg.norm(self.mics[:, None, :] - self.mics[None, :, :], axis=2)
        scale = self.sample_rate / self.speed_of_sound
        return (1.0 + self.tdoa_margin) * scale * float(np.max(diffs))

    def source_tdoas(self, source) -> np.ndarray:
        """Free-field pairwise TDOAs for a point source, in samples.

        Spherical-wavefront model: element (i, j) is
        (sample_rate/speed_of_sound) * (dist(source, mic_i) - dist(source, mic_j)).

        Parameters
        ----------
        source : array_like, shape (3,) or (Q, 3)
            Source position(s) in meters.

        Returns
        -------
        ndarray, shape (P,) or (Q, P)
            TDOAs in canonical pair order.

        Raises
        ------
        ValueError
            If a source position is not finite or coincides with a
            microphone.
        """
        src = np.asarray(source, dtype=float)
        squeeze = src.ndim == 1
        src = np.atleast_2d(src)
        if src.shape[1] != 3:
            raise ValueError("source must have xyz coordinates")
        if not np.all(np.isfinite(src)):
            raise ValueError("source position must be finite")
        dists = np.linalg.norm(src[:, None, :] - self.mics[None, :, :], axis=2)
        if np.any(dists == 0.0):
            raise ValueError("source coincides with a microphone position")
        scale = self.sample_rate / self.speed_of_sound
        pairs = self.pairs
        out = np.empty((src.shape[0], len(pairs)))
        for p, (i, j) in enumerate(pairs):
            out[:, p] = scale * (dists[:, i] - dists[:, j])
        return out[0] if squeeze else out


def nominal_square_array(
    side: float = 0.057,
    sample_rate: float = 16000.0,
    speed_of_sound: float = 343.0,
    tdoa_margin: float = 0.1,
) -> ArrayGeometry:
    """Nominal 4-microphone square, centered at the origin in the z=0 plane.

    Stand-in for small planar USB arrays whose exact coordinates vary by
    revision; pass measured positions via :func:`load_geometry` when known.
    Mic order: (-,-), (+,-), (+,+), (-,+).
    """
    h = side / 2.0
    mics = np.array(
        [
            [-h, -h, 0.0],
            [h, -h, 0.0],
            [h, h, 0.0],
            [-h, h, 0.0],
        ]
    )
    return ArrayGeometry(mics, sample_rate, speed_of_sound, tdoa_margin)


def load_geometry(path) -> ArrayGeometry:
    """Read an array geometry from a plain-text config file.

    Format: one directive per line, '#' starts a comment.

        sample_rate 16000
        speed_of_sound 343
        tdoa_margin 0.1
        mic <x> <y> <z>     # repeated, one line per microphone, in order

    sample_rate, speed_of_sound and tdoa_margin are optional and default to
    16000, 343 and 0.1.
    """
    mics = []
    params = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            key = tokens[0].lower()
            try:
                if key == "mic":
                    if len(tokens) != 4:
                        raise ValueError("expected 'mic x y z'")
                    mics.append([float(t) for t in tokens[1:]])
                elif key in ("sample_rate", "speed_of_sound", "tdoa_margin"):
                    if len(tokens) != 2:
                        raise ValueError(f"expected '{key} <value>'")
                    params[key] = float(tokens[1])
                else:
                    raise ValueError(f"unknown directive {key!r}")
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not mics:
        raise ValueError(f"{path}: no 'mic' lines found")
    return ArrayGeometry(np.array(mics, dtype=float), **params)
