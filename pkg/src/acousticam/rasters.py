"""Raster output: 8-bit PGM (P5) and plain-text CSV dumps of images.

Images are (height, width) arrays indexed [v-1, u-1]; files are written
row-major in v, so viewers show pixel (1, 1) in the top-left corner.
"""

from __future__ import annotations

import numpy as np

__all__ = ["scale_to_unit", "write_pgm", "write_csv"]


def scale_to_unit(image: np.ndarray) -> np.ndarray:
    """Per-frame max scaling into [0, 1]; an all-zero frame stays zero."""
    peak = float(np.max(np.abs(image))) if image.size else 0.0
    if peak == 0.0:
        return np.zeros_like(image, dtype=float)
    return np.clip(image / peak, 0.0, 1.0)


def write_pgm(path, unit_image: np.ndarray) -> None:
    """Write a [0, 1] image as binary 8-bit PGM."""
    img = np.asarray(unit_image, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_csv(path, image: np.ndarray) -> None:
    """Write raw image values as decimal text, one row of pixels per line."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    with open(path, "w", encoding="utf-8") as fh:
        for row in img:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
