"""Training loop: Adam on the velocity objective plus the frequency term.

Videos are stored in [0, 1] but the diffusion process runs on [-1, 1]
(the sampler maps back).  Everything is deterministic given the config
and seed: clip/step/noise draws come from one generator, degradation
pairs from the degradation config's own seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import tensor as T
from ..degrade import make_pair
from ..diffusion import build_schedule, noising
from ..losses import total_loss_parts
from ..network import Denoiser, condition_from_lr, save_checkpoint
from .config import ExperimentConfig
from . import dataset as ds
from . import io

LOSS_CSV_HEADER = ("step", "v_loss", "lf_loss", "hf_loss", "df_loss", "total_loss")


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, config_echo: str):
        super().__init__(f"non-finite loss at step {step}; config was:\n{config_echo}")
        self.step = step


class Adam:
    """Plain Adam with float64 moments; updates parameters in place."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.data.shape, dtype=np.float64) for p in self.params]
        self.v = [np.zeros(p.data.shape, dtype=np.float64) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[i] / b1c) / (np.sqrt(self.v[i] / b2c) + self.eps)
            p.data = (p.data.astype(np.float64) - update).astype(p.data.dtype)


def to_signal(video01: np.ndarray) -> np.ndarray:
    return (2.0 * video01 - 1.0).astype(np.float32)


def to_pixels(signal: np.ndarray) -> np.ndarray:
    return np.clip((signal + 1.0) / 2.0, 0.0, 1.0)


@dataclass
class ClipSet:
    names: list[str]
    hr: list[np.ndarray]  # [0, 1]
    lr: list[np.ndarray]  # [0, 1]

    def __len__(self) -> int:
        return len(self.hr)


def load_clips(cfg: ExperimentConfig) -> ClipSet:
    """Load HR clips and their LR pairs (from disk or synthesized)."""
    hr_files = ds.list_tensor_files(cfg.data.hr_dir)
    if not hr_files:
        raise FileNotFoundError(f"no .vtr clips found in {cfg.data.hr_dir}")
    names, hrs, lrs = [], [], []
    for i, path in enumerate(hr_files):
        hr = io.read_tensor(path)
        if cfg.data.lr_dir is not None:
            lr = io.read_tensor(Path(cfg.data.lr_dir) / path.name)
        else:
            lr, _, _ = make_pair(hr, cfg.degrade, clip_index=i)
        names.append(path.name)
        hrs.append(hr)
        lrs.append(lr)
    return ClipSet(names=names, hr=hrs, lr=lrs)


@dataclass
class TrainResult:
    checkpoint_path: Path
    csv_path: Path
    rows: list[tuple]


def run_training(cfg: ExperimentConfig, out_dir, seed: int | None = None) -> TrainResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)

    clips = load_clips(cfg)
    sched = build_schedule(cfg.schedule.t_max, cfg.schedule.kind)
    model = Denoiser(cfg.model, seed=seed)
    params = model.parameters()
    opt = Adam(params, lr=cfg.train.learning_rate)

    signals = [to_signal(hr) for hr in clips.hr]
    h, w = clips.hr[0].shape[-2:]
    conds = [to_signal(condition_from_lr(lr, h, w)) for lr in clips.lr]

    rows: list[tuple] = []
    for step in range(1, cfg.train.steps + 1):
        try:
            T.zero_grads(params)
            terms = []
            for _ in range(cfg.train.batch_size):
                idx = int(rng.integers(len(clips)))
                t = int(rng.integers(1, cfg.schedule.t_max + 1))
                noise = rng.standard_normal(signals[idx].shape).astype(np.float32)
                samp = noising(signals[idx], t, noise, sched)
                pred = model.forward(samp.noisy, t, conds[idx])
                terms.append(total_loss_parts(pred, samp, signals[idx], cfg.loss, sched))
            if cfg.train.batch_size == 1:
                total = terms[0].total
            else:
                acc = terms[0].total
                for part in terms[1:]:
                    acc = T.add(acc, part.total)
                total = T.scale(acc, 1.0 / cfg.train.batch_size)
            total.backward()
            opt.step()
        except T.NonFiniteError:
            from .config import to_json

            raise TrainingDiverged(step, to_json(cfg)) from None
        rows.append(
            (
                step,
                float(np.mean([p.v.item() for p in terms])),
                float(np.mean([p.bands.low.item() for p in terms])),
                float(np.mean([p.bands.high.item() for p in terms])),
                float(np.mean([p.bands.df.item() for p in terms])),
                total.item(),
            )
        )

    csv_path = out_dir / "losses.csv"
    write_loss_csv(csv_path, rows)
    checkpoint_path = out_dir / "checkpoint.bin"
    save_checkpoint(checkpoint_path, cfg.model, model.param_vector())
    return TrainResult(checkpoint_path=checkpoint_path, csv_path=csv_path, rows=rows)


def write_loss_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_CSV_HEADER)
        for row in rows:
            writer.writerow([row[0]] + [f"{v:.8g}" for v in row[1:]])
