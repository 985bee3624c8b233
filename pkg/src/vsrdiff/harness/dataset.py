"""Bundled toy dataset: moving textures with known per-frame motion.

Each clip is an analytic texture (sinusoid gratings plus a soft blob)
translated at a constant subpixel velocity, so the motion ground truth
used by the warping-error metric is exact by construction.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import io


def _render_clip(rng: np.random.Generator, frames: int, size: int, channels: int = 3) -> tuple[np.ndarray, tuple[float, float]]:
    vx = float(rng.uniform(-1.5, 1.5))
    vy = float(rng.uniform(-1.5, 1.5))
    n_waves = 3
    fx = rng.uniform(0.02, 0.15, size=n_waves)
    fy = rng.uniform(0.02, 0.15, size=n_waves)
    phase = rng.uniform(0, 2 * np.pi, size=n_waves)
    amp = rng.uniform(0.05, 0.2, size=(channels, n_waves))
    blob_c = rng.uniform(0.25 * size, 0.75 * size, size=2)
    blob_r = float(rng.uniform(3.0, 6.0))
    blob_amp = rng.uniform(-0.3, 0.3, size=channels)

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    clip = np.empty((frames, channels, size, size), dtype=np.float64)
    for t in range(frames):
        x_t = xs - vx * t
        y_t = ys - vy * t
        waves = np.stack(
            [np.sin(2 * np.pi * (fx[j] * x_t + fy[j] * y_t) + phase[j]) for j in range(n_waves)]
        )
        blob = np.exp(-((x_t - blob_c[0]) ** 2 + (y_t - blob_c[1]) ** 2) / (2 * blob_r**2))
        for c in range(channels):
            clip[t, c] = 0.5 + np.tensordot(amp[c], waves, axes=1) + blob_amp[c] * blob
    return np.clip(clip, 0.0, 1.0).astype(np.float32), (vx, vy)


def make_toy_dataset(out_dir, n_clips: int = 16, frames: int = 8, size: int = 32, seed: int = 0) -> dict:
    """Write clip_###.vtr files plus a manifest with motion ground truth."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "frames": frames, "size": size, "clips": []}
    for i in range(n_clips):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        clip, (vx, vy) = _render_clip(rng, frames, size)
        name = f"clip_{i:03d}.vtr"
        io.write_tensor(out_dir / name, clip)
        manifest["clips"].append({"file": name, "motion": [[vx, vy]] * (frames - 1)})
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def list_tensor_files(directory) -> list[Path]:
    return sorted(Path(directory).glob("*.vtr"))


def load_motion_manifest(path) -> dict[str, list[list[float]]]:
    """Map clip file name -> per-pair [dx, dy] motion entries."""
    doc = json.loads(Path(path).read_text())
    return {entry["file"]: entry["motion"] for entry in doc["clips"]}
