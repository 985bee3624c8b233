"""Synthetic degradation chain: blur -> noise -> downsample -> compression.

Every stage maps [0, 1] video to [0, 1] video and is deterministic given
the config seed; per-clip randomness is derived by mixing the seed with
the clip index, so clips can be processed in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel

STAGES = ("blur", "noise", "downsample", "compress")

# dequantized pixels deviate from the input by at most 8 * step (64
# coefficients, error step/2 each, basis amplitude <= 1/4)
_COMPRESS_STEP_HI = 1.0 / 2550.0  # q=100: bound 8*step < 1/255
_COMPRESS_STEP_LO = 2.0  # q=1: coarse enough to crush most AC content


@dataclass
class DegradationConfig:
    blur_sigma: tuple[float, float] = (0.2, 2.0)
    noise_std: tuple[float, float] = (0.0, 0.05)
    factor: int = 4
    quality: tuple[int, int] = (30, 95)
    order: tuple[str, ...] = STAGES
    seed: int = 0

    def __post_init__(self):
        if sorted(self.order) != sorted(STAGES):
            raise ValueError(f"order must be a permutation of {STAGES}, got {self.order}")
        if self.factor < 1:
            raise ValueError("factor must be >= 1")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(video: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur per frame/channel with reflect padding."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    video = np.asarray(video)
    if sigma == 0:
        return video.copy()
    t, c, h, w = video.shape
    k = gaussian_kernel(sigma)
    if k.size // 2 >= min(h, w):
        raise ValueError(f"blur radius {k.size // 2} too large for {h}x{w} frames")
    flat = np.ascontiguousarray(video.reshape(t * c, h, w).astype(np.float64))
    return _accel.sep_correlate2d(flat, k).reshape(video.shape).astype(video.dtype)


def add_noise(video: np.ndarray, std: float, seed: int) -> np.ndarray:
    """Add clamped zero-mean Gaussian noise, reproducible from the seed."""
    if std < 0:
        raise ValueError("std must be >= 0")
    video = np.asarray(video)
    if std == 0:
        return video.copy()
    rng = np.random.default_rng(seed)
    noisy = video + rng.normal(0.0, std, size=video.shape)
    return np.clip(noisy, 0.0, 1.0).astype(video.dtype)


def downsample(video: np.ndarray, factor: int) -> np.ndarray:
    """Area-average pooling by an integer factor that divides H and W."""
    video = np.asarray(video)
    if factor == 1:
        return video.copy()
    t, c, h, w = video.shape
    if h % factor or w % factor:
        raise ValueError(f"factor {factor} does not divide frame size {h}x{w}")
    pooled = video.reshape(t, c, h // factor, factor, w // factor, factor)
    return pooled.mean(axis=(3, 5), dtype=np.float64).astype(video.dtype)


def compression_step(q: int) -> float:
    """Quantization step for quality q in [1, 100] (log-interpolated)."""
    if not 1 <= q <= 100:
        raise ValueError(f"quality must be in [1, 100], got {q}")
    frac = (100 - q) / 99.0
    return float(_COMPRESS_STEP_HI * (_COMPRESS_STEP_LO / _COMPRESS_STEP_HI) ** frac)


def compress_surrogate(video: np.ndarray, q: int) -> np.ndarray:
    """Blocky compression stand-in: 8x8 DCT, uniform quantization, inverse.

    Frames not divisible by 8 are edge-padded for the transform and
    cropped back.  q=100 is near-lossless (max deviation below 1/255).
    """
    video = np.asarray(video)
    step = compression_step(q)
    t, c, h, w = video.shape
    ph = (-h) % 8
    pw = (-w) % 8
    frames = video.reshape(t * c, h, w).astype(np.float64)
    if ph or pw:
        frames = np.pad(frames, ((0, 0), (0, ph), (0, pw)), mode="edge")
    rec = _accel.block_dct_roundtrip(np.ascontiguousarray(frames), step)
    rec = rec[:, :h, :w].reshape(video.shape)
    return np.clip(rec, 0.0, 1.0).astype(video.dtype)


def sample_parameters(cfg: DegradationConfig, clip_index: int) -> dict:
    """Draw the per-clip stage parameters from the mixed seed."""
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, clip_index)))
    sigma = float(rng.uniform(*cfg.blur_sigma))
    std = float(rng.uniform(*cfg.noise_std))
    q = int(rng.integers(cfg.quality[0], cfg.quality[1] + 1))
    noise_seed = int(rng.integers(0, 2**63 - 1))
    return {"blur_sigma": sigma, "noise_std": std, "quality": q, "noise_seed": noise_seed}


def make_pair(video_hr: np.ndarray, cfg: DegradationConfig, clip_index: int = 0):
    """Degrade one HR clip; returns (lr, hr, sampled parameter dict)."""
    video_hr = np.asarray(video_hr)
    params = sample_parameters(cfg, clip_index)
    x = video_hr
    for stage in cfg.order:
        if stage == "blur":
            x = gaussian_blur(x, params["blur_sigma"])
        elif stage == "noise":
            x = add_noise(x, params["noise_std"], params["noise_seed"])
        elif stage == "downsample":
            x = downsample(x, cfg.factor)
        else:
            x = compress_surrogate(x, params["quality"])
    return x, video_hr, params


def bilinear_resize(video: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling of (T, C, H, W) frames (half-pixel centers)."""
    video = np.asarray(video)
    t, c, h, w = video.shape
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[None, None, :, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, None, None, :]
    v = video.astype(np.float64)
    out = (
        v[:, :, y0][:, :, :, x0] * (1 - fy) * (1 - fx)
        + v[:, :, y0][:, :, :, x1] * (1 - fy) * fx
        + v[:, :, y1][:, :, :, x0] * fy * (1 - fx)
        + v[:, :, y1][:, :, :, x1] * fy * fx
    )
    return out.astype(video.dtype)
