"""Band-PSNR trajectory analysis of the sampler's per-step clean estimates."""

from __future__ import annotations

import csv
from typing import Callable, Sequence

import numpy as np

from ..diffusion import NoiseSchedule, sample
from ..frequency import band_psnr, make_lowpass
from .train import to_pixels

FREQ_CSV_HEADER = ("step", "psnr_low", "psnr_high")


def band_trajectory(
    model: Callable[[np.ndarray, int], np.ndarray],
    reference01: np.ndarray,
    sched: NoiseSchedule,
    num_steps: int,
    rho: float,
    seed: int,
) -> list[tuple[int, float, float]]:
    """Per-step (index, low-band PSNR, high-band PSNR) for one clip.

    ``model`` works in [-1, 1] signal space; estimates are mapped back to
    pixels before the band comparison against the [0, 1] reference.
    """
    mask = make_lowpass(reference01.shape[-2], reference01.shape[-1], rho)
    trajectory = sample(model, reference01.shape, sched, num_steps, seed)
    rows = []
    for i, (_, estimate) in enumerate(trajectory):
        low, high = band_psnr(to_pixels(estimate), reference01, mask)
        rows.append((i, low, high))
    return rows


def mean_band_trajectory(
    model_fn: Callable[[np.ndarray, int, np.ndarray], np.ndarray],
    clips: Sequence[tuple[np.ndarray, np.ndarray]],
    sched: NoiseSchedule,
    num_steps: int,
    rho: float,
    seed: int,
) -> list[tuple[int, float, float]]:
    """Average the band trajectories of (reference01, cond_signal) clips."""
    lows = np.zeros(num_steps)
    highs = np.zeros(num_steps)
    for i, (ref01, cond) in enumerate(clips):
        rows = band_trajectory(
            lambda state, t: model_fn(state, t, cond), ref01, sched, num_steps, seed + i
        )
        lows += [r[1] for r in rows]
        highs += [r[2] for r in rows]
    n = len(clips)
    return [(i, lows[i] / n, highs[i] / n) for i in range(num_steps)]


def first_reach_index(values: Sequence[float], fraction: float = 0.9) -> int:
    """First index whose value reaches ``fraction`` of the final value."""
    final = values[-1]
    threshold = fraction * final
    for i, v in enumerate(values):
        if v >= threshold:
            return i
    return len(values) - 1


def write_freq_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FREQ_CSV_HEADER)
        for step, low, high in rows:
            writer.writerow([step, f"{low:.6f}", f"{high:.6f}"])
