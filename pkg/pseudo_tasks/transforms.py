"""Image transforms for pseudo-task synthesis, vectorised over a stack of images."""

from typing import Tuple

import numpy as np


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Normalised 2-D Gaussian filter of shape (size, size)."""
    half = (size - 1) / 2.0
    y, x = np.ogrid[-half:half + 1, -half:half + 1]
    kernel = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    kernel[kernel < np.finfo(kernel.dtype).eps * kernel.max()] = 0
    total = kernel.sum()
    if total != 0:
        kernel /= total
    return kernel


def blur_images(images: np.ndarray, sigma: float, size: int = 5) -> np.ndarray:
    """Convolve every image of an (n, h, w) stack with a Gaussian, zero padding at the borders."""
    kernel = gaussian_kernel(size, sigma)
    pad = size // 2
    n, h, w = images.shape
    padded = np.zeros((n, h + 2 * pad, w + 2 * pad))
    padded[:, pad:pad + h, pad:pad + w] = images
    out = np.zeros((n, h, w))
    for dy in range(size):
        for dx in range(size):
            if kernel[dy, dx]:
                out += kernel[dy, dx] * padded[:, dy:dy + h, dx:dx + w]
    return out


def _rotation_sources(shape: Tuple[int, int], degrees: float) -> Tuple[np.ndarray, np.ndarray]:
    """Source coordinates sampled by every output pixel for a rotation about the centre."""
    h, w = shape
    theta = np.deg2rad(degrees)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = y - cy, x - cx
    src_x = np.cos(theta) * dx + np.sin(theta) * dy + cx
    src_y = -np.sin(theta) * dx + np.cos(theta) * dy + cy
    return src_y, src_x


def rotate_images(images: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate every image of an (n, h, w) stack about its centre.

    Bilinear interpolation; source positions outside the frame read as 0.
    """
    n, h, w = images.shape
    src_y, src_x = _rotation_sources((h, w), degrees)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    fy = src_y - y0
    fx = src_x - x0
    out = np.zeros((n, h, w))
    for oy, wy in ((0, 1.0 - fy), (1, fy)):
        for ox, wx in ((0, 1.0 - fx), (1, fx)):
            yy = y0 + oy
            xx = x0 + ox
            inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            weight = np.where(inside, wy * wx, 0.0)
            values = images[:, np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            out += weight[None, :, :] * values
    return out
