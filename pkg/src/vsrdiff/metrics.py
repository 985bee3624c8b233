"""Reference-based quality metrics: PSNR, SSIM, and flow-warping error.

Warping error uses known per-frame-pair motion (synthetic clips carry
their ground-truth displacement), so no flow estimator is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .frequency import psnr_scalar

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class MotionField:
    """Per-frame-pair (dx, dy) displacements in pixels, shape (T-1, 2)."""

    displacements: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.displacements, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != 2:
            raise ValueError(f"MotionField: expected (T-1, 2), got {d.shape}")
        object.__setattr__(self, "displacements", d)

    def __len__(self) -> int:
        return self.displacements.shape[0]


def psnr(video: np.ndarray, reference: np.ndarray) -> float:
    """10*log10(1/MSE) over all elements, capped at 100 dB; range [0, 1]."""
    video = np.asarray(video)
    reference = np.asarray(reference)
    if video.shape != reference.shape:
        raise ValueError(f"psnr: shape mismatch {video.shape} vs {reference.shape}")
    mse = float(np.mean((video.astype(np.float64) - reference.astype(np.float64)) ** 2))
    return psnr_scalar(mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def ssim(video: np.ndarray, reference: np.ndarray) -> float:
    """Single-scale SSIM on the channel-mean luminance, frame-averaged.

    11x11 Gaussian window (sigma 1.5), stabilizers (0.01)^2 and (0.03)^2
    for unit dynamic range; the map is evaluated on the valid (fully
    windowed) region only.
    """
    video = np.asarray(video, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if video.shape != reference.shape:
        raise ValueError(f"ssim: shape mismatch {video.shape} vs {reference.shape}")
    if video.ndim != 4:
        raise ValueError(f"ssim: expected (T, C, H, W), got {video.shape}")
    h, w = video.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"ssim: frames {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    x = video.mean(axis=1)
    y = reference.mean(axis=1)
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = _accel.valid_correlate2d(x, win)
    mu_y = _accel.valid_correlate2d(y, win)
    xx = _accel.valid_correlate2d(x * x, win) - mu_x * mu_x
    yy = _accel.valid_correlate2d(y * y, win) - mu_y * mu_y
    xy = _accel.valid_correlate2d(x * y, win) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * xy + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (xx + yy + SSIM_C2)
    return float(np.mean(num / den, dtype=np.float64))


def warping_error(video: np.ndarray, motion: MotionField) -> float:
    """MSE between each frame and its motion-warped predecessor.

    Frame t is warped forward by the pair's (dx, dy) with bilinear
    sampling; pixels whose source lies out of bounds are masked out.
    Returns the raw mean over pairs (callers report it scaled by 1e3).
    """
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4:
        raise ValueError(f"warping_error: expected (T, C, H, W), got {video.shape}")
    t = video.shape[0]
    if len(motion) != t - 1:
        raise ValueError(f"warping_error: {len(motion)} motion entries for {t} frames")
    errs = []
    for i in range(t - 1):
        dx, dy = motion.displacements[i]
        warped, mask = _accel.bilinear_warp(video[i], float(dx), float(dy))
        diff2 = (warped - video[i + 1]) ** 2
        valid = mask > 0
        if not valid.any():
            raise ValueError(f"warping_error: motion ({dx}, {dy}) leaves no valid pixels")
        errs.append(float(diff2[:, valid].mean()))
    return float(np.mean(errs))
