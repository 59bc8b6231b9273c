"""Polynomial map from pixel coordinates to pairwise TDOAs.

The calibration model is a tensor-product polynomial: for normalized pixel
coordinates x, y in [-1, 1] and each microphone pair, the predicted TDOA is

    tau(x, y) = sum_{a=0..L} sum_{b=0..L} x^a * y^b * coeffs[a*(L+1)+b]

All (L+1)^2 monomials with each exponent independently up to L are used (a
product basis, not total degree).  Coefficients are estimated with an
ordinary least-squares fit over T >= (L+1)^2 target pixels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "TargetSet",
    "RegressionModel",
    "UnderdeterminedFitError",
    "SingularDesignError",
    "normalize_pixel",
    "design_matrix",
    "fit",
]

# Above this condition estimate the normal equations switch to an SVD-based
# solve; above SINGULAR_CONDITION the design is rejected outright.
FALLBACK_CONDITION = 1e8
SINGULAR_CONDITION = 1e12


class UnderdeterminedFitError(ValueError):
    """Fewer targets than polynomial coefficients."""


class SingularDesignError(ValueError):
    """Target layout does not determine the polynomial (rank-deficient)."""


def normalize_pixel(u, size):
    """Map a 1-based pixel coordinate to [-1, 1]: (2u - size - 1)/(size - 1).

    u = 1 maps to -1 and u = size to +1; u may be fractional.
    """
    return (2.0 * np.asarray(u, dtype=float) - size - 1.0) / (size - 1.0)


def design_matrix(targets, order: int, width: int, height: int) -> np.ndarray:
    """Monomial design matrix for a list of target pixels.

    Row t holds x(u_t)^a * y(v_t)^b for all (a, b) in row-major basis order
    (index a*(order+1)+b), so column 0 is all ones.

    Parameters
    ----------
    targets : array_like, shape (T, 2)
        Pixel coordinates (u, v), 1-based.
    order : int
        Polynomial order L; each exponent runs 0..L independently.

    Returns
    -------
    ndarray, shape (T, (order+1)**2)
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] == 0:
        raise ValueError("need at least one target")
    if targets.shape[1] != 2:
        raise ValueError("targets must be (u, v) pairs")
    if order < 0:
        raise ValueError("polynomial order must be non-negative")
    x = normalize_pixel(targets[:, 0], width)
    y = normalize_pixel(targets[:, 1], height)
    n = order + 1
    xp = np.stack([x**a for a in range(n)], axis=1)  # T x n
    yp = np.stack([y**b for b in range(n)], axis=1)
    return (xp[:, :, None] * yp[:, None, :]).reshape(len(x), n * n)


@dataclass(frozen=True, eq=False)
class TargetSet:
    """Calibration measurements: T target pixels with one P-vector each.

    targets : (T, 2) pixel coordinates (u, v)
    tdoas   : (T, P) measured TDOAs, samples, canonical pair order
    """

    targets: np.ndarray
    tdoas: np.ndarray

    def __post_init__(self):
        targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        tdoas = np.atleast_2d(np.asarray(self.tdoas, dtype=float))
        if targets.shape[1] != 2:
            raise ValueError("targets must be (u, v) pairs")
        if tdoas.shape[0] != targets.shape[0]:
            raise ValueError("tdoas must have one row per target")
        if targets.shape[0] < 1:
            raise ValueError("need at least one target")
        if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(tdoas))):
            raise ValueError("targets and tdoas must be finite")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "tdoas", tdoas)

    @property
    def n_targets(self) -> int:
        return self.targets.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.tdoas.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Fitted pixel-to-TDOA polynomial.

    coeffs has shape ((order+1)**2, P) with rows in the row-major (a, b)
    basis order used by :func:`design_matrix`.  sample_rate records the
    audio rate the calibration TDOAs were measured at (samples units), so
    downstream consumers can reject mismatched streams.
    """

    order: int
    coeffs: np.ndarray
    width: int
    height: int
    sample_rate: float = 0.0

    def __post_init__(self):
        coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        n_terms = (self.order + 1) ** 2
        if coeffs.shape[0] != n_terms:
            raise ValueError(
                f"coeffs must have {n_terms} rows for order {self.order}, "
                f"got {coeffs.shape[0]}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_pairs(self) -> int:
        return self.coeffs.shape[1]

    def predict(self, u, v) -> np.ndarray:
        """Evaluate the polynomial at pixel coordinates.

        u, v may be scalars or equally-shaped arrays, fractional, and
        slightly outside the image (the polynomial extrapolates).

        Returns shape (P,) for scalar input, else (Q, P).
        """
        scalar = np.asarray(u).ndim == 0
        uv = np.stack(
            [np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))],
            axis=1,
        )
        out = design_matrix(uv, self.order, self.width, self.height) @ self.coeffs
        return out[0] if scalar else out

    def save(self, path) -> None:
        """Write the model as plain text.

        First line: L M P U V FS (order, mic count, pair count, image
        width, image height, sample rate).  Then (L+1)^2 rows of P
        coefficients each, 17 significant digits.
        """
        p = self.n_pairs
        # invert P = M(M-1)/2
        m = int(round((1 + np.sqrt(1 + 8 * p)) / 2))
        if m * (m - 1) // 2 != p:
            m = 0  # pair count not from a full pair set; recorded as 0
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.order} {m} {p} {self.width} {self.height} "
                     f"{self.sample_rate:.17g}\n")
            for row in self.coeffs:
                fh.write(" ".join(f"{c:.17g}" for c in row) + "\n")

    @classmethod
    def load(cls, path) -> "RegressionModel":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 6:
                raise ValueError(f"{path}: bad model header")
            order, _m, p, width, height = (int(t) for t in header[:5])
            sample_rate = float(header[5])
            rows = [[float(t) for t in line.split()] for line in fh if line.strip()]
        coeffs = np.array(rows, dtype=float)
        if coeffs.shape != ((order + 1) ** 2, p):
            raise ValueError(
                f"{path}: expected {(order + 1) ** 2}x{p} coefficients, "
                f"got {coeffs.shape[0]}x{coeffs.shape[1]}"
            )
        return cls(order, coeffs, width, height, sample_rate)


def fit(
    target_set: TargetSet,
    order: int,
    width: int,
    height: int,
    ridge: float = 0.0,
    sample_rate: float = 0.0,
) -> RegressionModel:
    """Least-squares fit of the pixel-to-TDOA polynomial.

    Solves the normal equations (A^T A) c = A^T tau with a symmetric
    positive-definite factorization; when the condition estimate of A^T A
    exceeds 1e8 the solve falls back to an SVD-based least squares, and
    above 1e12 the design is rejected as singular.

    Parameters
    ----------
    target_set : TargetSet
    order : int
        Polynomial order L.  Requires T >= (L+1)^2 targets.
    width, height : int
        Image dimensions the pixel normalization refers to.
    ridge : float
        Optional Tikhonov term added to the normal equations; 0 by default.
    sample_rate : float
        Recorded in the model for downstream consistency checks.

    Raises
    ------
    UnderdeterminedFitError
        If T < (L+1)^2.
    SingularDesignError
        If the target layout is (numerically) rank deficient, e.g. all
        targets collinear.
    """
    n_terms = (order + 1) ** 2
    t = target_set.n_targets
    if t < n_terms:
        raise UnderdeterminedFitError(
            f"{t} targets cannot determine {n_terms} coefficients "
            f"(order {order} needs at least {n_terms})"
        )
    if t == n_terms:
        warnings.warn(
            f"target count {t} equals coefficient count: exactly determined "
            f"fit, no redundancy against measurement noise",
            stacklevel=2,
        )
    a = design_matrix(target_set.targets, order, width, height)
    ata = a.T @ a
    if ridge:
        ata = ata + ridge * np.eye(n_terms)
    atb = a.T @ target_set.tdoas

    cond = np.linalg.cond(ata)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SingularDesignError(
            f"design matrix is rank deficient (condition estimate {cond:.3e}); "
            f"targets likely collinear or duplicated beyond what order "
            f"{order} can distinguish"
        )
    if cond > FALLBACK_CONDITION:
        coeffs, *_ = np.linalg.lstsq(a, target_set.tdoas, rcond=None)
    else:
        c, low = scipy.linalg.cho_factor(ata)
        coeffs = scipy.linalg.cho_solve((c, low), atb)

    residual = ata @ coeffs - atb
    rel = np.linalg.norm(residual) / max(np.linalg.norm(atb), 1e-300)
    if rel > 1e-8:
        raise SingularDesignError(
            f"normal-equation solve failed to converge (relative residual "
            f"{rel:.3e} > 1e-8); condition estimate {cond:.3e}"
        )
    return RegressionModel(order, coeffs, width, height, sample_rate)
