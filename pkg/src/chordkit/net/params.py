"""Trainable tensors, their gradient buffers, and checkpoint serialization."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig


class CheckpointError(Exception):
    """Checkpoint file is corrupt or does not match this format version."""


def _xavier(rng, fan_in, fan_out, shape=None):
    scale = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, scale, size=shape if shape is not None else (fan_in, fan_out))


def sinusoid_table(span: int, dim: int) -> np.ndarray:
    """Sinusoidal embeddings for relative offsets -(span-1)..(span-1).

    Row r encodes offset r - (span - 1); even columns are sines, odd are
    cosines, with the usual geometric frequency ladder.
    """
    offsets = np.arange(-(span - 1), span, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = offsets / np.power(10000.0, 2.0 * (idx // 2) / dim)
    table = np.empty((2 * span - 1, dim))
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table


class ModelParams:
    """Named float64 tensors with same-shaped gradient buffers.

    ``tensors`` holds the trainable weights; ``buffers`` holds persistent
    non-trainable state (batch-norm running statistics). Gradients accumulate
    into ``grads`` until zero_grads() clears them.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.tensors: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        if rng is None:
            rng = np.random.default_rng(0)
        self._init(config, rng)
        self.grads: dict[str, np.ndarray] = {
            name: np.zeros_like(t) for name, t in self.tensors.items()}

    def _init(self, cfg: ModelConfig, rng: np.random.Generator) -> None:
        d, ffn, k = cfg.input_dim, cfg.ffn_dim, cfg.depthwise_kernel
        t = self.tensors
        t["proj.W"] = _xavier(rng, cfg.cqt_bins, d)
        t["proj.b"] = np.zeros(d)
        t["proj_ln.g"] = np.ones(d)
        t["proj_ln.b"] = np.zeros(d)
        for i in range(cfg.num_layers):
            p = f"layers.{i}."
            for ffn_name in ("ffn1", "ffn2"):
                t[p + ffn_name + ".ln.g"] = np.ones(d)
                t[p + ffn_name + ".ln.b"] = np.zeros(d)
                t[p + ffn_name + ".W1"] = _xavier(rng, d, ffn)
                t[p + ffn_name + ".b1"] = np.zeros(ffn)
                t[p + ffn_name + ".W2"] = _xavier(rng, ffn, d)
                t[p + ffn_name + ".b2"] = np.zeros(d)
            t[p + "attn.ln.g"] = np.ones(d)
            t[p + "attn.ln.b"] = np.zeros(d)
            for w in ("Wq", "Wk", "Wv", "Wo"):
                t[p + "attn." + w] = _xavier(rng, d, d)
            t[p + "attn.rel"] = sinusoid_table(cfg.max_offset, d)
            t[p + "attn.u"] = np.zeros(d)
            t[p + "attn.v"] = np.zeros(d)
            t[p + "conv.ln.g"] = np.ones(d)
            t[p + "conv.ln.b"] = np.zeros(d)
            t[p + "conv.W1"] = _xavier(rng, d, 2 * d)
            t[p + "conv.b1"] = np.zeros(2 * d)
            t[p + "conv.K"] = rng.normal(0.0, np.sqrt(1.0 / k), size=(k, d))
            t[p + "conv.bn.g"] = np.ones(d)
            t[p + "conv.bn.b"] = np.zeros(d)
            t[p + "conv.W2"] = _xavier(rng, d, d)
            t[p + "conv.b2"] = np.zeros(d)
            t[p + "out_ln.g"] = np.ones(d)
            t[p + "out_ln.b"] = np.zeros(d)
            self.buffers[p + "conv.bn.rmean"] = np.zeros(d)
            self.buffers[p + "conv.bn.rvar"] = np.ones(d)
        t["head.W"] = _xavier(rng, d, cfg.output_dim)
        t["head.b"] = np.zeros(cfg.output_dim)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "ModelParams":
        clone = ModelParams.__new__(ModelParams)
        clone.config = self.config
        clone.tensors = {k: v.copy() for k, v in self.tensors.items()}
        clone.buffers = {k: v.copy() for k, v in self.buffers.items()}
        clone.grads = {k: np.zeros_like(v) for k, v in self.tensors.items()}
        return clone


_CKPT_MAGIC = b"CFCK"
_CKPT_VERSION = 1


def _pack_tensor_table(table: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(table))]
    for name in sorted(table):
        arr = np.ascontiguousarray(table[name], dtype="<f4")
        encoded = name.encode()
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, offset: int = 0):
        self.blob = blob
        self.offset = offset

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        out = self.blob[self.offset:self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _unpack_tensor_table(reader: _Reader) -> dict[str, np.ndarray]:
    (count,) = reader.unpack("<I")
    table = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode()
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(reader.take(4 * size), dtype="<f4")
        table[name] = data.reshape(shape).astype(np.float64)
    return table


def save_checkpoint(path: str | Path, params: ModelParams,
                    optimizer_state: dict[str, np.ndarray] | None = None) -> None:
    """Write config, weights and buffers (float32) with a checksum footer."""
    config_json = json.dumps(params.config.to_dict(), sort_keys=True).encode()
    body = [
        _CKPT_MAGIC,
        struct.pack("<H", _CKPT_VERSION),
        struct.pack("<I", len(config_json)),
        config_json,
        _pack_tensor_table(params.tensors),
        _pack_tensor_table(params.buffers),
        struct.pack("<B", 1 if optimizer_state else 0),
    ]
    if optimizer_state:
        body.append(_pack_tensor_table(optimizer_state))
    payload = b"".join(body)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(hashlib.sha256(payload).digest())


def load_checkpoint(path: str | Path
                    ) -> tuple[ModelParams, dict[str, np.ndarray] | None]:
    blob = Path(path).read_bytes()
    if len(blob) < 32:
        raise CheckpointError(f"{path}: too short to be a checkpoint")
    payload, footer = blob[:-32], blob[-32:]
    if hashlib.sha256(payload).digest() != footer:
        raise CheckpointError(f"{path}: checksum mismatch")
    reader = _Reader(payload)
    if reader.take(4) != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    (version,) = reader.unpack("<H")
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: version {version}, expected {_CKPT_VERSION}")
    (config_len,) = reader.unpack("<I")
    config = ModelConfig.from_dict(json.loads(reader.take(config_len)))
    tensors = _unpack_tensor_table(reader)
    buffers = _unpack_tensor_table(reader)
    (has_opt,) = reader.unpack("<B")
    opt_state = _unpack_tensor_table(reader) if has_opt else None

    params = ModelParams(config)
    if set(tensors) != set(params.tensors) or set(buffers) != set(params.buffers):
        raise CheckpointError(f"{path}: tensor table does not match the config")
    for name, arr in tensors.items():
        if arr.shape != params.tensors[name].shape:
            raise CheckpointError(f"{path}: shape mismatch for {name}")
        params.tensors[name] = arr
    for name, arr in buffers.items():
        params.buffers[name] = arr
    params.grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return params, opt_state
