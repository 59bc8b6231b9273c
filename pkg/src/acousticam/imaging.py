"""Steered phase-transform imaging with an offline low-rank factorization.

The steering matrix has one row per pixel (row index ``(v-1)*width +
(u-1)``) and one column per (pair, frequency bin) in the supervector
layout of :func:`acousticam.dsp.phat_supervector`.  Its entry for pixel
(u, v), pair p and bin f is ``exp(2j*pi*f*tau/N)`` where tau is the
calibrated TDOA prediction for that pixel and pair.

The acoustic image is the real part of the steering matrix applied to a
supervector.  Because the matrix is tall and strongly rank-deficient in
practice, an offline truncated SVD turns the per-frame product into two
small ones: the factorization keeps the smallest rank K whose retained
spectral energy is at least a (1 - delta) share of the total, the total
being exactly rows*cols for a unit-magnitude matrix.

Images are returned as (height, width) float arrays, so ``image[v-1, u-1]``
is the energy at pixel (u, v), the same pixel order as the steering rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regression import RegressionModel

__all__ = [
    "SteeringMatrix",
    "SvdPhatModel",
    "build_steering",
    "truncate",
    "image_brute",
    "image_fast",
    "op_counts",
    "steering_rank",
]

SVD_MODEL_FORMAT = "acousticam-svdphat-v1"


@dataclass(frozen=True, eq=False)
class SteeringMatrix:
    """Dense unit-magnitude steering matrix plus its pixel/bin layout."""

    matrix: np.ndarray  # (width*height, n_pairs*(frame_size//2 + 1)) complex
    width: int
    height: int
    frame_size: int
    n_pairs: int

    def __post_init__(self):
        nf = self.frame_size // 2 + 1
        expect = (self.width * self.height, self.n_pairs * nf)
        if self.matrix.shape != expect:
            raise ValueError(f"steering matrix must be {expect}, got {self.matrix.shape}")

    @property
    def n_bins(self) -> int:
        return self.frame_size // 2 + 1


def _pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """All pixel centers in steering-row order: u fastest, 1-based."""
    uu, vv = np.meshgrid(
        np.arange(1, width + 1, dtype=float),
        np.arange(1, height + 1, dtype=float),
    )
    return uu.ravel(), vv.ravel()


def _steering_block(taus: np.ndarray, frame_size: int) -> np.ndarray:
    """Unit phasors exp(2j*pi*f*tau/N) for a (Q, P) block of TDOAs."""
    nf = frame_size // 2 + 1
    bins = np.arange(nf, dtype=float)
    phase = 2.0 * np.pi * taus[:, :, None] * bins[None, None, :] / frame_size
    q = taus.shape[0]
    return np.exp(1j * phase).reshape(q, taus.shape[1] * nf)


def build_steering(model: RegressionModel, frame_size: int) -> SteeringMatrix:
    """Evaluate the calibration model at every pixel and phase-encode it.

    Parameters
    ----------
    model : RegressionModel
        Pixel-to-TDOA map; its width/height set the image size.
    frame_size : int
        Even analysis frame length N; bins 0..N/2 are encoded.
    """
    if frame_size % 2 != 0 or frame_size < 2:
        raise ValueError("frame_size must be even and positive")
    u, v = _pixel_grid(model.width, model.height)
    taus = model.predict(u, v)  # (UV, P)
    return SteeringMatrix(
        _steering_block(taus, frame_size),
        model.width,
        model.height,
        frame_size,
        model.n_pairs,
    )


@dataclass(frozen=True, eq=False)
class SvdPhatModel:
    """Rank-K factorization of a steering matrix.

    ``left @ right`` approximates the steering matrix; ``left`` already
    carries the singular values (it is the product of the left singular
    vectors and S), ``right`` is V^H.
    """

    left: np.ndarray  # (width*height, rank) complex
    right: np.ndarray  # (rank, n_pairs*(N/2+1)) complex
    rank: int
    delta: float
    energy_kept: float
    width: int
    height: int
    frame_size: int
    n_pairs: int

    def image(self, supervector: np.ndarray) -> np.ndarray:
        return image_fast(self, supervector)

    def save(self, path) -> None:
        """Persist as an .npz archive with a format tag."""
        np.savez_compressed(
            path,
            format=SVD_MODEL_FORMAT,
            left=self.left,
            right=self.right,
            rank=self.rank,
            delta=self.delta,
            energy_kept=self.energy_kept,
            width=self.width,
            height=self.height,
            frame_size=self.frame_size,
            n_pairs=self.n_pairs,
        )

    @classmethod
    def load(cls, path) -> "SvdPhatModel":
        with np.load(path, allow_pickle=False) as data:
            tag = str(data["format"])
            if tag != SVD_MODEL_FORMAT:
                raise ValueError(f"{path}: unknown model format {tag!r}")
            return cls(
                left=data["left"],
                right=data["right"],
                rank=int(data["rank"]),
                delta=float(data["delta"]),
                energy_kept=float(data["energy_kept"]),
                width=int(data["width"]),
                height=int(data["height"]),
                frame_size=int(data["frame_size"]),
                n_pairs=int(data["n_pairs"]),
            )


def _gram_eigs(gram: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues (clipped at 0) and eigenvectors of a Gram matrix."""
    vals, vecs = np.linalg.eigh(gram)
    order = np.argsort(vals)[::-1]
    return np.clip(vals[order], 0.0, None), vecs[:, order]


def _rank_for_energy(eigvals: np.ndarray, total_energy: float, delta: float) -> int:
    target = (1.0 - delta) * total_energy
    cumulative = np.cumsum(eigvals)
    idx = np.searchsorted(cumulative, target)
    if idx >= len(eigvals):
        return len(eigvals)
    return int(idx) + 1


def truncate(steering: SteeringMatrix, delta: float) -> SvdPhatModel:
    """Truncated SVD of the steering matrix under the energy criterion.

    K is the smallest rank whose retained squared singular values reach a
    (1 - delta) fraction of the total energy.  The total is taken as
    rows*cols exactly (every entry has unit magnitude), not as a float
    accumulation over the matrix.

    The factorization goes through the eigendecomposition of the much
    smaller Gram matrix W^H W; left vectors are recovered as W @ V_K,
    which equals U_K S_K directly.

    Raises
    ------
    ValueError for delta outside (0, 1).
    np.linalg.LinAlgError if the eigendecomposition fails to converge.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    w = steering.matrix
    total_energy = float(w.shape[0] * w.shape[1])
    try:
        eigvals, eigvecs = _gram_eigs(np.conj(w.T) @ w)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigendecomposition of the {w.shape[1]}x{w.shape[1]} Gram matrix "
            f"failed: {exc}"
        ) from exc
    k = _rank_for_energy(eigvals, total_energy, delta)
    vk = eigvecs[:, :k]
    return SvdPhatModel(
        left=w @ vk,
        right=np.conj(vk.T),
        rank=k,
        delta=delta,
        energy_kept=float(np.sum(eigvals[:k]) / total_energy),
        width=steering.width,
        height=steering.height,
        frame_size=steering.frame_size,
        n_pairs=steering.n_pairs,
    )


def _to_image(flat: np.ndarray, width: int, height: int) -> np.ndarray:
    return flat.reshape(height, width)


def image_brute(steering: SteeringMatrix, supervector: np.ndarray) -> np.ndarray:
    """Exact acoustic image: real part of the full steering product.

    O(width*height*P*N); the reference path the fast factorized product
    is checked against.
    """
    supervector = np.asarray(supervector)
    if supervector.shape != (steering.matrix.shape[1],):
        raise ValueError(
            f"supervector must have length {steering.matrix.shape[1]}, "
            f"got {supervector.shape}"
        )
    return _to_image(
        (steering.matrix @ supervector).real, steering.width, steering.height
    )


def image_fast(model: SvdPhatModel, supervector: np.ndarray) -> np.ndarray:
    """Acoustic image through the rank-K factorization.

    Computes the K-dimensional intermediate right @ x first, then the tall
    skinny product: O(width*height*K + K*P*N) per frame.
    """
    supervector = np.asarray(supervector)
    if supervector.shape != (model.right.shape[1],):
        raise ValueError(
            f"supervector must have length {model.right.shape[1]}, "
            f"got {supervector.shape}"
        )
    return _to_image(
        (model.left @ (model.right @ supervector)).real, model.width, model.height
    )


def op_counts(
    width: int, height: int, n_mics: int, frame_size: int, rank: int
) -> tuple[int, int, float]:
    """Complex multiplication counts per frame: dense vs factorized.

    Returns (brute, fast, brute/fast) where
    brute = U*V*P*(N/2+1) and fast = U*V*K + K*P*(N/2+1), all exact
    integer arithmetic.
    """
    if min(width, height, n_mics, frame_size, rank) <= 0:
        raise ValueError("all dimensions must be positive")
    n_pairs = n_mics * (n_mics - 1) // 2
    n_bins = frame_size // 2 + 1
    brute = width * height * n_pairs * n_bins
    fast = width * height * rank + rank * n_pairs * n_bins
    return brute, fast, brute / fast


def steering_rank(
    model: RegressionModel,
    frame_size: int,
    delta: float,
    block_rows: int = 8192,
) -> tuple[int, np.ndarray]:
    """Truncation rank for a steering matrix too large to hold in memory.

    Accumulates the Gram matrix over row blocks (pixels) without ever
    materializing the full steering matrix, then applies the same energy
    criterion as :func:`truncate`.

    Returns
    -------
    (rank, eigvals) : the selected K and the descending Gram eigenvalues.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    nf = frame_size // 2 + 1
    cols = model.n_pairs * nf
    gram = np.zeros((cols, cols), dtype=complex)
    u, v = _pixel_grid(model.width, model.height)
    n_rows = len(u)
    for start in range(0, n_rows, block_rows):
        stop = min(start + block_rows, n_rows)
        taus = model.predict(u[start:stop], v[start:stop])
        block = _steering_block(taus, frame_size)
        gram += np.conj(block.T) @ block
    eigvals, _ = _gram_eigs(gram)
    total_energy = float(n_rows * cols)
    return _rank_for_energy(eigvals, total_energy, delta), eigvals
