"""Named-tensor parameter checkpoints.

Layout: the magic string "SFAGC01", then one record per tensor: name
length (u64), the UTF-8 name, rank (u64), the extents (u64 each), and
the values as 64-bit floats.  All integers and floats little-endian.
Records carry names rather than positions so a file survives reordering
of the parameter list, and loading into a model validates every shape.
"""

from __future__ import annotations

import numpy as np

from .errors import CheckpointError, InvalidArgument

__all__ = ["CHECKPOINT_MAGIC", "save_checkpoint", "load_checkpoint", "load_into"]

CHECKPOINT_MAGIC = b"SFAGC01"


def save_checkpoint(path: str, params) -> None:
    """Write named parameter tensors; every name must be set and unique."""
    named = []
    for p in params:
        data = np.asarray(getattr(p, "data", p), dtype="<f8")
        name = getattr(p, "name", None)
        if not name:
            raise InvalidArgument("save_checkpoint: every parameter needs a name")
        named.append((name, data))
    names = [n for n, _ in named]
    if len(names) != len(set(names)):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise InvalidArgument(f"save_checkpoint: duplicate names {dupes}")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        for name, data in named:
            raw = name.encode("utf-8")
            np.array([len(raw)], dtype="<u8").tofile(fh)
            fh.write(raw)
            np.array([data.ndim], dtype="<u8").tofile(fh)
            np.array(data.shape, dtype="<u8").tofile(fh)
            data.tofile(fh)


def load_checkpoint(path: str) -> dict:
    """Read a checkpoint into a name -> float array dict."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: bad magic {blob[:len(CHECKPOINT_MAGIC)]!r}")
    pos = len(CHECKPOINT_MAGIC)

    def take_u64(count):
        nonlocal pos
        end = pos + 8 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated at byte {pos}")
        vals = np.frombuffer(blob, dtype="<u8", count=count, offset=pos)
        pos = end
        return [int(v) for v in vals]

    out = {}
    while pos < len(blob):
        (name_len,) = take_u64(1)
        if pos + name_len > len(blob):
            raise CheckpointError(f"{path}: truncated at byte {pos}")
        try:
            name = blob[pos : pos + name_len].decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"{path}: undecodable tensor name at byte {pos}") from None
        pos += name_len
        (rank,) = take_u64(1)
        if rank > 16:
            raise CheckpointError(f"{path}: implausible rank {rank} for {name!r}")
        shape = take_u64(rank)
        count = int(np.prod(shape)) if shape else 1
        end = pos + 8 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated values for {name!r}")
        values = np.frombuffer(blob, dtype="<f8", count=count, offset=pos)
        pos = end
        if name in out:
            raise CheckpointError(f"{path}: duplicate tensor {name!r}")
        out[name] = values.reshape(shape).astype(float)
    return out


def load_into(params, path: str) -> None:
    """Restore parameter values by name, in place.

    The file and the parameter list must describe exactly the same set
    of tensors, shapes included; any disagreement raises with the
    offending names.
    """
    stored = load_checkpoint(path)
    params = list(params)
    have = {p.name for p in params}
    missing = sorted(set(stored) - have)
    absent = sorted(have - set(stored))
    if missing or absent:
        raise CheckpointError(
            f"{path}: parameter set mismatch; file-only {missing}, model-only {absent}"
        )
    for p in params:
        data = stored[p.name]
        if data.shape != p.data.shape:
            raise CheckpointError(
                f"{path}: width mismatch for {p.name!r}: file {data.shape}, model {p.data.shape}"
            )
        p.data[...] = data
