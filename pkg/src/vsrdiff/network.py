"""Toy video denoiser: patch tokens, interleaved spatial/temporal
single-head self-attention, and an optional local gating module.

The local gate (LIEM) pools features over channels (average and max),
mixes the two pooled maps with a 3x3 conv, and squashes to a (0, 1) gate
that multiplies every channel.  It can be wired into a block three ways:

  i    attention(gate(F) * F) + F
  ii   gate(attention(F)) * attention(F) + F
  iii  gate(attention(F) + F) * (attention(F) + F)

Attention never sees positional encodings, so it is permutation
equivariant over tokens; spatial structure enters through the convs and
the gate.  The LR conditioning video is bilinearly upsampled and folded
in through a two-layer conv branch added to the input embedding.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .degrade import bilinear_resize
from .tensor import ShapeError, Tensor

LIEM_POSITIONS = ("i", "ii", "iii", "none")

CHECKPOINT_MAGIC = b"VCKP"
CHECKPOINT_VERSION = 1


@dataclass
class LiemConfig:
    position: str = "i"
    spa_local: bool = True
    temp_local: bool = True

    def __post_init__(self):
        if self.position not in LIEM_POSITIONS:
            raise ValueError(f"position must be one of {LIEM_POSITIONS}")


@dataclass
class DenoiserSpec:
    width: int = 32
    blocks: int = 4
    patch: int = 4
    in_channels: int = 3
    liem: LiemConfig = field(default_factory=LiemConfig)
    cond_mode: str = "lr_upsample"

    def __post_init__(self):
        if isinstance(self.liem, dict):
            self.liem = LiemConfig(**self.liem)
        if self.cond_mode not in ("lr_upsample", "none"):
            raise ValueError(f"unknown cond_mode {self.cond_mode!r}")

    def block_types(self) -> list[str]:
        return ["spatial" if i % 2 == 0 else "temporal" for i in range(self.blocks)]

    def liem_in_block(self, block_type: str) -> bool:
        if self.liem.position == "none":
            return False
        return self.liem.spa_local if block_type == "spatial" else self.liem.temp_local

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def spec_hash(self) -> bytes:
        return hashlib.sha256(self.canonical_json().encode()).digest()


def sinusoidal_features(t: int, dim: int) -> np.ndarray:
    """Standard sin/cos step embedding of length dim."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    args = t * freqs
    emb = np.concatenate([np.sin(args), np.cos(args)])
    if emb.size < dim:
        emb = np.concatenate([emb, np.zeros(dim - emb.size)])
    return emb.astype(T.DEFAULT_DTYPE)


def condition_from_lr(lr_video: np.ndarray, height: int, width: int) -> np.ndarray:
    """Deterministic conditioning signal: the LR clip upsampled to HR size."""
    return bilinear_resize(np.asarray(lr_video), height, width)


# ---------------------------------------------------------------------------
# functional pieces
# ---------------------------------------------------------------------------

def liem_gate(features: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """One-channel (0,1) gate from pooled features: sigmoid(conv(avg||max))."""
    pooled = T.concat(
        [T.channel_pool(features, "average"), T.channel_pool(features, "max")], axis=-3
    )
    return T.sigmoid(T.conv2d_3x3(pooled, kernel, bias))


def liem_forward(features: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Gate the features: every channel is multiplied by the gate map."""
    return T.channel_gate(features, liem_gate(features, kernel, bias))


def global_attention(tokens: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, wo: Tensor) -> Tensor:
    """Single-head scaled dot-product self-attention over (..., N, D) tokens."""
    d = tokens.shape[-1]
    q = T.linear(tokens, wq)
    k = T.linear(tokens, wk)
    v = T.linear(tokens, wv)
    perm = tuple(range(tokens.data.ndim - 2)) + (tokens.data.ndim - 1, tokens.data.ndim - 2)
    scores = T.scale(T.bmm(q, T.transpose(k, perm)), 1.0 / np.sqrt(d))
    return T.linear(T.bmm(T.softmax_lastdim(scores), v), wo)


def _maps_to_tokens(maps: Tensor, block_type: str) -> Tensor:
    t, d, gh, gw = maps.shape
    if block_type == "spatial":
        return T.reshape(T.transpose(maps, (0, 2, 3, 1)), (t, gh * gw, d))
    return T.reshape(T.transpose(maps, (2, 3, 0, 1)), (gh * gw, t, d))


def _tokens_to_maps(tokens: Tensor, block_type: str, grid: tuple[int, int]) -> Tensor:
    gh, gw = grid
    if block_type == "spatial":
        t, _, d = tokens.shape
        return T.transpose(T.reshape(tokens, (t, gh, gw, d)), (0, 3, 1, 2))
    _, t, d = tokens.shape
    return T.transpose(T.reshape(tokens, (gh, gw, t, d)), (2, 3, 0, 1))


def block_forward(
    maps: Tensor,
    block_type: str,
    params: dict[str, Tensor],
    prefix: str,
    position: str,
    use_liem: bool,
) -> Tensor:
    """One attention block over grid feature maps (T, D, gh, gw)."""
    if position not in LIEM_POSITIONS:
        raise ValueError(f"unknown position {position!r}")
    grid = maps.shape[-2:]

    def attend(m: Tensor) -> Tensor:
        tok = _maps_to_tokens(m, block_type)
        out = global_attention(
            tok,
            params[f"{prefix}.wq"],
            params[f"{prefix}.wk"],
            params[f"{prefix}.wv"],
            params[f"{prefix}.wo"],
        )
        return _tokens_to_maps(out, block_type, grid)

    if not use_liem or position == "none":
        return T.add(attend(maps), maps)
    lk = params[f"{prefix}.liem.w"]
    lb = params[f"{prefix}.liem.b"]
    if position == "i":
        return T.add(attend(liem_forward(maps, lk, lb)), maps)
    if position == "ii":
        att = attend(maps)
        return T.add(liem_forward(att, lk, lb), maps)
    s = T.add(attend(maps), maps)
    return liem_forward(s, lk, lb)


def _patchify(video: np.ndarray, p: int) -> np.ndarray:
    t, c, h, w = video.shape
    gh, gw = h // p, w // p
    x = video.reshape(t, c, gh, p, gw, p).transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(x.reshape(t, gh * gw, c * p * p))


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

class Denoiser:
    """Velocity predictor with named parameters in a fixed registry order."""

    def __init__(self, spec: DenoiserSpec, seed: int = 0):
        self.spec = spec
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        d = spec.width
        pdim = spec.in_channels * spec.patch * spec.patch

        def lin(name, fan_in, fan_out):
            self.params[f"{name}.w"] = T.parameter(T.init_linear_weight(rng, fan_in, fan_out))
            self.params[f"{name}.b"] = T.parameter(np.zeros(fan_out, dtype=T.DEFAULT_DTYPE))

        def conv(name, cout, cin):
            self.params[f"{name}.w"] = T.parameter(T.init_conv_kernel(rng, cout, cin))
            self.params[f"{name}.b"] = T.parameter(np.zeros(cout, dtype=T.DEFAULT_DTYPE))

        lin("embed", pdim, d)
        conv("embed_conv", d, d)
        if spec.cond_mode == "lr_upsample":
            lin("cond", pdim, d)
            conv("cond_conv1", d, d)
            conv("cond_conv2", d, d)
        lin("time1", d, d)
        lin("time2", d, d)
        for i, btype in enumerate(spec.block_types()):
            for proj in ("wq", "wk", "wv", "wo"):
                self.params[f"block{i}.{proj}"] = T.parameter(
                    T.init_linear_weight(rng, d, d)
                )
            if spec.liem_in_block(btype):
                conv(f"block{i}.liem", 1, 2)
        lin("out", d, pdim)

    # -- parameter plumbing --------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.data.astype(np.float32).ravel() for p in self.params.values()])

    def load_param_vector(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float32)
        if vec.size != self.param_count():
            raise ValueError(f"expected {self.param_count()} parameters, got {vec.size}")
        off = 0
        for p in self.params.values():
            n = p.data.size
            p.data = vec[off : off + n].reshape(p.data.shape).astype(T.DEFAULT_DTYPE)
            off += n

    def set_zero(self) -> None:
        for p in self.params.values():
            p.data = np.zeros_like(p.data)

    # -- forward --------------------------------------------------------------

    def forward(self, noisy: np.ndarray, t: int, cond: np.ndarray | None = None) -> Tensor:
        noisy = np.asarray(noisy)
        if noisy.ndim != 4 or noisy.shape[1] != self.spec.in_channels:
            raise ShapeError(f"denoiser: expected (T, {self.spec.in_channels}, H, W), got {noisy.shape}")
        frames, _, h, w = noisy.shape
        p = self.spec.patch
        if h % p or w % p:
            raise ShapeError(f"denoiser: patch {p} does not divide frame size {h}x{w}")
        gh, gw = h // p, w // p
        d = self.spec.width
        pm = self.params

        tok = T.bias_add(T.linear(T.constant(_patchify(noisy, p)), pm["embed.w"]), pm["embed.b"])
        if self.spec.cond_mode == "lr_upsample" and cond is not None:
            cond = np.asarray(cond)
            if cond.shape != noisy.shape:
                raise ShapeError(f"denoiser: cond {cond.shape} must match input {noisy.shape}")
            ct = T.bias_add(T.linear(T.constant(_patchify(cond, p)), pm["cond.w"]), pm["cond.b"])
            cmaps = _tokens_to_maps(ct, "spatial", (gh, gw))
            cmaps = T.relu(T.conv2d_3x3(cmaps, pm["cond_conv1.w"], pm["cond_conv1.b"]))
            cmaps = T.conv2d_3x3(cmaps, pm["cond_conv2.w"], pm["cond_conv2.b"])
            tok = T.add(tok, _maps_to_tokens(cmaps, "spatial"))
        temb = T.bias_add(
            T.linear(T.constant(sinusoidal_features(t, d)), pm["time1.w"]), pm["time1.b"]
        )
        temb = T.bias_add(T.linear(T.relu(temb), pm["time2.w"]), pm["time2.b"])
        tok = T.bias_add(tok, temb, axis=-1)

        maps = _tokens_to_maps(tok, "spatial", (gh, gw))
        maps = T.conv2d_3x3(maps, pm["embed_conv.w"], pm["embed_conv.b"])
        for i, btype in enumerate(self.spec.block_types()):
            maps = block_forward(
                maps,
                btype,
                pm,
                f"block{i}",
                self.spec.liem.position,
                self.spec.liem_in_block(btype),
            )
        out_tok = T.bias_add(
            T.linear(_maps_to_tokens(maps, "spatial"), pm["out.w"]), pm["out.b"]
        )
        out = T.reshape(out_tok, (frames, gh, gw, self.spec.in_channels, p, p))
        out = T.transpose(out, (0, 3, 1, 4, 2, 5))
        return T.reshape(out, noisy.shape)

    def predict(self, noisy: np.ndarray, t: int, cond: np.ndarray | None = None) -> np.ndarray:
        """Graph-free forward pass for sampling/evaluation."""
        with T.no_grad():
            return self.forward(noisy, t, cond).data


# ---------------------------------------------------------------------------
# checkpoint file
# ---------------------------------------------------------------------------

def save_checkpoint(path, spec: DenoiserSpec, params: np.ndarray) -> None:
    """Versioned binary checkpoint: magic, version, spec hash, f32 LE data."""
    params = np.asarray(params, dtype="<f4").ravel()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(spec.spec_hash())
        fh.write(struct.pack("<Q", params.size))
        fh.write(params.tobytes())


def load_checkpoint(path, spec: DenoiserSpec) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic at offset 0)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    stored_hash = blob[8:40]
    if stored_hash != spec.spec_hash():
        raise ValueError(f"{path}: checkpoint was written for a different model spec")
    (count,) = struct.unpack_from("<Q", blob, 40)
    data = np.frombuffer(blob, dtype="<f4", offset=48)
    if data.size != count:
        raise ValueError(f"{path}: payload has {data.size} values, header says {count}")
    return data.copy()
