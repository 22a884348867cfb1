"""Zero-dependency image output: binary PPM (P6, 8-bit) patch grids.

Normalized values are mapped to bytes by a fixed affine clamp so the
same value always renders the same gray regardless of the batch.
"""

from __future__ import annotations

import numpy as np

__all__ = ["write_ppm_grid"]


def write_ppm_grid(
    path,
    patches: np.ndarray,
    side: int,
    cols: int | None = None,
    lo: float = -2.5,
    hi: float = 2.5,
    pad: int = 1,
) -> None:
    """Tile row-vector patches (n, side*side) into one grayscale P6 image."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[1] != side * side:
        raise ValueError(f"expected (n, {side * side}) patches")
    n = patches.shape[0]
    if cols is None:
        cols = int(np.ceil(np.sqrt(n)))
    rows = (n + cols - 1) // cols
    h = rows * side + (rows + 1) * pad
    w = cols * side + (cols + 1) * pad
    canvas = np.zeros((h, w))
    for i in range(n):
        r, c = divmod(i, cols)
        y = pad + r * (side + pad)
        x = pad + c * (side + pad)
        canvas[y : y + side, x : x + side] = patches[i].reshape(side, side)
    scaled = np.clip((canvas - lo) / (hi - lo), 0.0, 1.0)
    gray = np.round(scaled * 255.0).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())
