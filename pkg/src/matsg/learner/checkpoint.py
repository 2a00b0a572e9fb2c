"""Binary checkpoints for policy weights.

Layout (little-endian): ``b"MGPP"``, u32 version, u32 array count, then per
array a u32 rank followed by that many u32 dimensions, then all arrays as
f64 in :data:`~matsg.learner.network.PARAM_ORDER`.  A trailing UTF-8 JSON
blob records the action kind and action count.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .network import PARAM_ORDER, PolicyNetwork

MAGIC = b"MGPP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, net: PolicyNetwork, meta: dict | None = None) -> None:
    arrays = [np.asarray(net.params[k], dtype="<f8") for k in PARAM_ORDER]
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for a in arrays:
        parts.append(struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape))
    parts += [a.tobytes(order="C") for a in arrays]
    parts.append(json.dumps(meta or {}, sort_keys=True).encode("utf-8"))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path, dtype=np.float32) -> tuple[PolicyNetwork, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a policy checkpoint (bad magic)")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        if count != len(PARAM_ORDER):
            raise CheckpointError(f"{path}: expected {len(PARAM_ORDER)} arrays, found {count}")
        off = 12
        shapes = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", data, off)
            shapes.append(struct.unpack_from(f"<{ndim}I", data, off + 4))
            off += 4 + 4 * ndim
    except struct.error:
        raise CheckpointError(f"{path}: truncated header") from None
    params = {}
    for name, shape in zip(PARAM_ORDER, shapes):
        n = int(np.prod(shape))
        if off + 8 * n > len(data):
            raise CheckpointError(f"{path}: truncated weight data")
        params[name] = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
    try:
        meta = json.loads(data[off:].decode("utf-8") or "{}")
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: unreadable metadata") from None
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise CheckpointError(f"{path}: non-finite weights")
    n_inputs, hidden = params["W1"].shape
    if params["Wpi"].shape[0] != hidden or params["W2"].shape != (hidden, hidden):
        raise CheckpointError(f"{path}: inconsistent layer shapes")
    net = PolicyNetwork(n_inputs, params["Wpi"].shape[1], hidden, dtype=dtype, params=params)
    return net, meta
