"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic      8 bytes  b"CVPLCKPT"
    version    u32
    hdr_len    u32, then hdr_len bytes of UTF-8 JSON model config
    blocks     u32
    per block: name_len u16, name, ndim u8, ndim x u64 shape, float64 '<f8' values
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .model import ModelConfig, Policy

MAGIC = b"CVPLCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(policy: Policy, path) -> None:
    header = json.dumps(policy.config.to_dict(), sort_keys=True).encode()
    state = policy.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(state)))
        for name, tensor in state.items():
            raw = name.encode()
            values = tensor.detach().cpu().double().numpy()
            fh.write(struct.pack("<HB", len(raw), values.ndim))
            fh.write(raw)
            fh.write(struct.pack(f"<{values.ndim}Q", *values.shape))
            fh.write(values.astype("<f8").tobytes())


def _read(fh, fmt):
    size = struct.calcsize(fmt)
    buf = fh.read(size)
    if len(buf) != size:
        raise CheckpointError("truncated checkpoint")
    return struct.unpack(fmt, buf)


def load_checkpoint(path, dtype=torch.float32) -> Policy:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
        version, hdr_len = _read(fh, "<II")
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        config = ModelConfig(**json.loads(fh.read(hdr_len).decode()))
        (count,) = _read(fh, "<I")
        state = {}
        for _ in range(count):
            name_len, ndim = _read(fh, "<HB")
            name = fh.read(name_len).decode()
            shape = _read(fh, f"<{ndim}Q") if ndim else ()
            n_values = int(np.prod(shape)) if ndim else 1
            buf = fh.read(8 * n_values)
            if len(buf) != 8 * n_values:
                raise CheckpointError("truncated checkpoint")
            state[name] = torch.from_numpy(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    policy = Policy(config, seed=None)
    expected = policy.state_dict()
    if set(state) != set(expected):
        raise CheckpointError(f"{path}: parameter blocks do not match the model layout")
    for name, tensor in state.items():
        if tuple(tensor.shape) != tuple(expected[name].shape):
            raise CheckpointError(f"{path}: block {name} has shape {tuple(tensor.shape)}")
    policy.load_state_dict(state)
    return policy.to(dtype)
