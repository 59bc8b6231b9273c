"""Pinhole camera with a single radial distortion coefficient.

A point (x, y, z) in front of the camera (z > 0) lands at

    u = (U/2) * (x/z) * (1 + k*(x^2 + y^2)/z^2) + U/2
    v = (V/2) * (y/z) * (1 + k*(x^2 + y^2)/z^2) + V/2

k > 0 gives pincushion distortion, k < 0 barrel, k = 0 an ideal pinhole.
Pixel coordinates are 1-based in all of the math here: the image spans
[1, U] x [1, V] inclusive, and conversion to 0-based raster indices happens
only when writing image files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CameraModel"]


@dataclass(frozen=True)
class CameraModel:
    """Image dimensions plus one radial distortion coefficient."""

    width: int
    height: int
    distortion: float = 0.0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("image must be at least 2x2 pixels")
        if not np.isfinite(self.distortion):
            raise ValueError("distortion coefficient must be finite")

    def project(self, points):
        """Map xyz points (meters) to real-valued pixel coordinates.

        Parameters
        ----------
        points : array_like, shape (3,) or (Q, 3)

        Returns
        -------
        (u, v) : floats or ndarrays
            Unclamped pixel coordinates; they may fall outside the image.

        Raises
        ------
        ValueError
            If any point has z <= 0 (behind or in the camera plane).
        """
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != 3:
            raise ValueError("points must have xyz coordinates")
        z = pts[:, 2]
        if np.any(z <= 0):
            raise ValueError("points must lie in front of the camera (z > 0)")
        xn = pts[:, 0] / z
        yn = pts[:, 1] / z
        factor = 1.0 + self.distortion * (xn**2 + yn**2)
        u = (self.width / 2.0) * xn * factor + self.width / 2.0
        v = (self.height / 2.0) * yn * factor + self.height / 2.0
        if squeeze:
            return float(u[0]), float(v[0])
        return u, v

    def inside_image(self, u, v):
        """True where (u, v) lies inside the image under the 1-based
        convention: 1 <= u <= width and 1 <= v <= height, bounds inclusive."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ok = (u >= 1.0) & (u <= self.width) & (v >= 1.0) & (v <= self.height)
        return bool(ok) if ok.ndim == 0 else ok

    def pixel_to_plane(
        self,
        u,
        v,
        plane_z: float = 1.0,
        tol: float = 1e-10,
        max_iter: int = 100,
    ) -> np.ndarray:
        """Invert the projection onto the plane z = plane_z.

        Solves for the xyz point on the given plane that projects to
        (u, v), using a damped fixed-point iteration on the normalized
        coordinates.  Converges for the moderate distortion levels this
        model is meant for (|k| up to a few tenths over the image).

        Parameters
        ----------
        u, v : scalars or arrays of pixel coordinates
        plane_z : float
            Distance of the target plane, meters.  Must be positive.
        tol : float
            Convergence threshold on the reprojected pixel error.
        max_iter : int
            Iteration cap; exceeding it raises with diagnostics.

        Returns
        -------
        ndarray, shape (3,) or (Q, 3)
        """
        if plane_z <= 0:
            raise ValueError("plane_z must be positive")
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        v_arr = np.atleast_1d(np.asarray(v, dtype=float))
        squeeze = np.asarray(u).ndim == 0
        a = 2.0 * u_arr / self.width - 1.0
        b = 2.0 * v_arr / self.height - 1.0
        x = a.copy()
        y = b.copy()
        k = self.distortion
        for _ in range(max_iter):
            r2 = x * x + y * y
            factor = 1.0 + k * r2
            x = 0.5 * x + 0.5 * a / factor
            y = 0.5 * y + 0.5 * b / factor
            pu, pv = self.project(np.stack([x, y, np.ones_like(x)], axis=1))
            err = np.maximum(np.abs(pu - u_arr), np.abs(pv - v_arr))
            if np.max(err) < tol:
                break
        else:
            worst = int(np.argmax(err))
            raise ValueError(
                f"projection inversion did not converge for pixel "
                f"({u_arr[worst]:g}, {v_arr[worst]:g}) with k={k:g}: "
                f"residual {err[worst]:.3e} px after {max_iter} iterations"
            )
        pts = np.stack([x * plane_z, y * plane_z, np.full_like(x, plane_z)], axis=1)
        return pts[0] if squeeze else pts
