"""Binary model checkpoints.

Layout (all little-endian)::

    b"IRGS"                      magic
    uint32  version              currently 1
    uint8   mode                 0 = autoencoder, 1 = vae
    uint32  height, width, hidden, latent
    float32 parameter arrays, row-major, in ``recon.param_names(mode)`` order
"""
import struct

import numpy as np

from irgs.recon import MODES, ReconModel, param_names

MAGIC = b"IRGS"
VERSION = 1
_HEADER = struct.Struct("<4sIB4I")


class CheckpointError(ValueError):
    pass


def to_bytes(model):
    model.validate()
    header = _HEADER.pack(MAGIC, VERSION, MODES.index(model.mode),
                          model.height, model.width, model.hidden, model.latent)
    body = b"".join(np.ascontiguousarray(model.params[k], dtype="<f4").tobytes()
                    for k in param_names(model.mode))
    return header + body


def from_bytes(data):
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, mode_id, h, w, hidden, latent = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if mode_id >= len(MODES):
        raise CheckpointError(f"unknown mode byte {mode_id}")
    model = ReconModel(h, w, hidden, latent, MODES[mode_id], {})
    offset = _HEADER.size
    params = {}
    for name, shape in model.param_shapes().items():
        n = int(np.prod(shape))
        end = offset + 4 * n
        if end > len(data):
            raise CheckpointError(f"truncated parameter {name}")
        params[name] = np.frombuffer(data, dtype="<f4", count=n, offset=offset) \
            .astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes")
    model.params = params
    return model.validate()


def save(path, model):
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
