"""Variance-preserving noise schedule, forward noising, and sampling.

The schedule keeps ``alpha[t]**2 + sigma[t]**2 == 1``; the network is
trained to predict the velocity ``v = alpha[t] * noise - sigma[t] * clean``.
Clean-sample recovery is exposed in two algebraically related forms (see
:func:`recover_clean`), and the sampler is a deterministic re-noising
loop built on the velocity parametrization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

COSINE_OFFSET = 0.008  # small endpoint offset so sigma[0] stays positive


@dataclass(frozen=True)
class NoiseSchedule:
    t_max: int
    alpha: np.ndarray  # float64, shape (t_max + 1,), strictly decreasing
    sigma: np.ndarray  # float64, shape (t_max + 1,), strictly increasing

    def __post_init__(self):
        if self.alpha.shape != (self.t_max + 1,) or self.sigma.shape != (self.t_max + 1,):
            raise ValueError("schedule tables must have t_max + 1 entries")


def build_schedule(t_max: int = 999, kind: str = "cosine") -> NoiseSchedule:
    """Build the signal/noise tables for t = 0 .. t_max."""
    if t_max < 1:
        raise ValueError(f"build_schedule: t_max must be >= 1, got {t_max}")
    if kind != "cosine":
        raise ValueError(f"build_schedule: unknown kind {kind!r}")
    t = np.arange(t_max + 1, dtype=np.float64)
    angle = 0.5 * np.pi * (t / t_max + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)
    return NoiseSchedule(t_max=t_max, alpha=np.cos(angle), sigma=np.sin(angle))


@dataclass(frozen=True)
class NoisedSample:
    """One forward-noising draw: noisy = alpha[t]*clean + sigma[t]*noise."""

    noisy: np.ndarray
    t: int
    noise: np.ndarray
    clean: np.ndarray


def _check_step(t: int, sched: NoiseSchedule) -> None:
    if not 0 <= t <= sched.t_max:
        raise ValueError(f"step {t} outside [0, {sched.t_max}]")


def noising(clean: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule) -> NoisedSample:
    clean = np.asarray(clean)
    noise = np.asarray(noise)
    if clean.shape != noise.shape:
        raise ValueError(f"noising: shape mismatch {clean.shape} vs {noise.shape}")
    _check_step(t, sched)
    a = clean.dtype.type(sched.alpha[t])
    s = clean.dtype.type(sched.sigma[t])
    return NoisedSample(noisy=a * clean + s * noise, t=t, noise=noise, clean=clean)


def v_target(clean: np.ndarray, noise: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Velocity regression target alpha[t]*noise - sigma[t]*clean."""
    clean = np.asarray(clean)
    noise = np.asarray(noise)
    if clean.shape != noise.shape:
        raise ValueError(f"v_target: shape mismatch {clean.shape} vs {noise.shape}")
    _check_step(t, sched)
    a = clean.dtype.type(sched.alpha[t])
    s = clean.dtype.type(sched.sigma[t])
    return a * noise - s * clean


def recover_clean(
    prediction: np.ndarray,
    sample: NoisedSample,
    sched: NoiseSchedule,
    mode: str = "standard",
) -> np.ndarray:
    """Estimate the clean sample from a velocity prediction.

    mode "standard" computes ``alpha[t]*noisy - sigma[t]*prediction`` from
    the noisy sample alone.  mode "paper" computes
    ``(alpha[t]*noise - prediction) / sigma[t]`` using the stored forward
    noise, which only exists at training time.  Both return the true clean
    sample when the prediction is the exact velocity; for an imperfect
    prediction they differ (deviation d maps to sigma*d and d/sigma
    respectively).
    """
    prediction = np.asarray(prediction)
    if prediction.shape != sample.noisy.shape:
        raise ValueError(
            f"recover_clean: prediction {prediction.shape} vs sample {sample.noisy.shape}"
        )
    _check_step(sample.t, sched)
    a = prediction.dtype.type(sched.alpha[sample.t])
    s = prediction.dtype.type(sched.sigma[sample.t])
    if mode == "standard":
        return a * sample.noisy - s * prediction
    if mode == "paper":
        if sample.t == 0:
            raise ValueError("recover_clean: paper mode is undefined at t=0 (sigma ~ 0)")
        return (a * sample.noise - prediction) / s
    raise ValueError(f"recover_clean: unknown mode {mode!r}")


def noise_from_v(prediction: np.ndarray, noisy: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Implied noise estimate sigma[t]*noisy + alpha[t]*prediction."""
    a = prediction.dtype.type(sched.alpha[t])
    s = prediction.dtype.type(sched.sigma[t])
    return s * noisy + a * prediction


def sample_steps(t_max: int, num_steps: int) -> np.ndarray:
    """Descending step grid from t_max to 0 with num_steps predictions."""
    if num_steps < 1:
        raise ValueError("sample: num_steps must be >= 1")
    return np.round(np.linspace(t_max, 0, num_steps + 1)).astype(np.int64)


def sample(
    model: Callable[[np.ndarray, int], np.ndarray],
    shape: tuple[int, ...],
    sched: NoiseSchedule,
    num_steps: int,
    seed: int,
) -> list[tuple[int, np.ndarray]]:
    """Deterministic sampling trajectory.

    ``model(noisy, t)`` must return a velocity prediction.  Returns the
    per-step list of (t, clean estimate); the last estimate is the output.
    """
    grid = sample_steps(sched.t_max, num_steps)
    rng = np.random.default_rng(seed)
    state = rng.standard_normal(shape).astype(np.float32)
    trajectory: list[tuple[int, np.ndarray]] = []
    for i in range(num_steps):
        t = int(grid[i])
        pred = np.asarray(model(state, t))
        a = np.float32(sched.alpha[t])
        s = np.float32(sched.sigma[t])
        clean_est = a * state - s * pred
        trajectory.append((t, clean_est))
        t_next = int(grid[i + 1])
        if t_next == t:
            continue
        noise_est = s * state + a * pred
        a_n = np.float32(sched.alpha[t_next])
        s_n = np.float32(sched.sigma[t_next])
        state = a_n * clean_est + s_n * noise_est
    return trajectory
