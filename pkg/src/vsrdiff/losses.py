"""Training objectives: velocity MSE, band-split frequency loss, total loss.

The frequency loss compares unnormalized per-frame DFTs of the recovered
and reference videos, split into low/high bands by a binary radial mask,
as mean L1 over the stacked real and imaginary parts.  Band weights shift
with the diffusion step: the low-band weight ``(t / t_max) ** alpha_exp``
grows with t, its complement goes to the high band.  The step-dependent
scale on the whole frequency term decays to zero at t_max.

All loss functions return graph tensors so gradients flow to the
prediction; reference inputs may be plain arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import frequency
from . import tensor as T
from .diffusion import NoisedSample, NoiseSchedule
from .tensor import Tensor

DF_VARIANTS = ("direct", "inverse", "unified", "off")
B_SHAPES = ("linear", "exponential")


@dataclass
class LossConfig:
    alpha_exp: float = 2.0  # exponent of the low-band weight curve
    beta: float = 1.0  # overall scale of the frequency term
    b_shape: str = "linear"
    df_variant: str = "direct"
    rho: float = 0.25  # low-pass cutoff of the band mask
    norm: str = "l1"
    t_max: int = 999

    def __post_init__(self):
        if self.alpha_exp <= 0:
            raise ValueError("alpha_exp must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.b_shape not in B_SHAPES:
            raise ValueError(f"b_shape must be one of {B_SHAPES}")
        if self.df_variant not in DF_VARIANTS:
            raise ValueError(f"df_variant must be one of {DF_VARIANTS}")
        if self.norm != "l1":
            raise ValueError("only the l1 spectrum norm is supported")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else T.constant(x)


def v_loss(prediction, target_v) -> Tensor:
    """Mean squared error between predicted and target velocity."""
    pred = _as_tensor(prediction)
    tgt = _as_tensor(target_v)
    if pred.shape != tgt.shape:
        raise T.ShapeError(f"v_loss: shape mismatch {pred.shape} vs {tgt.shape}")
    return T.mean_all(T.square(T.sub(pred, tgt)))


def c_weight(t: int, cfg: LossConfig) -> float:
    """Low-band weight (t / t_max) ** alpha_exp, 0 at t=0 and 1 at t_max."""
    if not 0 <= t <= cfg.t_max:
        raise ValueError(f"c_weight: step {t} outside [0, {cfg.t_max}]")
    return float((t / cfg.t_max) ** cfg.alpha_exp)


def b_weight(t: int, cfg: LossConfig) -> float:
    """Scale of the frequency term; beta at t=0, decaying to 0 at t_max."""
    if not 0 <= t <= cfg.t_max:
        raise ValueError(f"b_weight: step {t} outside [0, {cfg.t_max}]")
    frac = t / cfg.t_max
    if cfg.b_shape == "linear":
        return float(cfg.beta * (1.0 - frac))
    return float(cfg.beta * (math.exp(1.0 - frac) - 1.0) / (math.e - 1.0))


@lru_cache(maxsize=16)
def _band_masks(h: int, w: int, rho: float) -> tuple[np.ndarray, np.ndarray]:
    low = frequency.make_lowpass(h, w, rho)
    return low, 1.0 - low


class BandLosses(NamedTuple):
    df: Tensor
    low: Tensor
    high: Tensor


def df_loss_parts(x_hat, x_ref, t: int, cfg: LossConfig) -> BandLosses:
    """Band losses plus their step-weighted combination."""
    pred = _as_tensor(x_hat)
    ref = np.asarray(x_ref.data if isinstance(x_ref, Tensor) else x_ref)
    if pred.shape != ref.shape:
        raise T.ShapeError(f"df_loss: shape mismatch {pred.shape} vs {ref.shape}")
    if cfg.df_variant == "off":
        zero = T.constant(np.zeros((), dtype=pred.dtype))
        return BandLosses(df=zero, low=zero, high=zero)

    h, w = pred.shape[-2:]
    mask_low, mask_high = _band_masks(h, w, cfg.rho)
    spec_pred = T.dft2_reim(pred)
    ref_fft = np.fft.fft2(ref.astype(np.float64), axes=(-2, -1))
    spec_ref = T.constant(np.stack([ref_fft.real, ref_fft.imag]))
    diff = T.sub(spec_pred, spec_ref)
    shape = diff.shape
    low = T.mean_all(T.absolute(T.mul(diff, T.constant(np.broadcast_to(mask_low, shape)))))
    high = T.mean_all(T.absolute(T.mul(diff, T.constant(np.broadcast_to(mask_high, shape)))))

    c = c_weight(t, cfg)
    if cfg.df_variant == "direct":
        df = T.add(c * low, (1.0 - c) * high)
    elif cfg.df_variant == "inverse":
        df = T.add((1.0 - c) * low, c * high)
    else:  # unified: one constraint over the whole spectrum
        df = T.add(low, high)
    return BandLosses(df=df, low=low, high=high)


def df_loss(x_hat, x_ref, t: int, cfg: LossConfig) -> Tensor:
    return df_loss_parts(x_hat, x_ref, t, cfg).df


class TotalLoss(NamedTuple):
    total: Tensor
    v: Tensor
    bands: BandLosses
    b: float


def total_loss_parts(
    prediction,
    sample: NoisedSample,
    clean_video,
    cfg: LossConfig,
    sched: NoiseSchedule,
) -> TotalLoss:
    """Velocity loss plus the step-scaled frequency loss on the recovery.

    The clean estimate is rebuilt inside the graph from the noisy sample
    (the inference-side recovery form, with identity decoding), so the
    frequency term backpropagates into the prediction.
    """
    pred = _as_tensor(prediction)
    clean = np.asarray(clean_video.data if isinstance(clean_video, Tensor) else clean_video)
    if pred.shape != sample.noisy.shape:
        raise T.ShapeError(f"total_loss: prediction {pred.shape} vs sample {sample.noisy.shape}")
    a = float(sched.alpha[sample.t])
    s = float(sched.sigma[sample.t])
    target = a * sample.noise - s * sample.clean
    lv = v_loss(pred, target.astype(pred.dtype))
    recovered = T.add(T.scale(pred, -s), T.constant(a * sample.noisy))
    bands = df_loss_parts(recovered, clean, sample.t, cfg)
    b = b_weight(sample.t, cfg)
    total = T.add(lv, b * bands.df) if cfg.df_variant != "off" else lv
    return TotalLoss(total=total, v=lv, bands=bands, b=b)


def total_loss(prediction, sample, clean_video, cfg, sched) -> Tensor:
    return total_loss_parts(prediction, sample, clean_video, cfg, sched).total
