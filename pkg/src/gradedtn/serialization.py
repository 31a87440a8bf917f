"""Binary container for graded tensors.

Layout (all integers little-endian):

    magic  b"GRTN"            4 bytes
    version u16               currently 1
    n_u1   u16                number of U(1) factors next to the parity
    nlegs  u16
    per leg:
        dual u8, nsectors u32
        per sector: parity u8, n_u1 x i64 charge, u64 degeneracy
    nblocks u64
    per block, in canonical (sorted key) order:
        per leg: u32 sector index into that leg's sector list
        degeneracy product x complex128, row major, little-endian,
        real/imag interleaved (the native numpy layout)

Round trips are bit exact: block data is written with tobytes() and read
back with frombuffer(), no re-encoding of the doubles happens anywhere.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .charges import GradedSpace
from .tensor import GradedTensor

MAGIC = b"GRTN"
VERSION = 1


def _write_leg(f, leg: GradedSpace):
    f.write(struct.pack("<BI", 1 if leg.dual else 0, len(leg.sectors)))
    for charge, degen in leg.sectors:
        f.write(struct.pack("<B", charge[0]))
        for q in charge[1:]:
            f.write(struct.pack("<q", q))
        f.write(struct.pack("<Q", degen))


def _read_leg(f, n_u1: int) -> GradedSpace:
    dual, nsec = struct.unpack("<BI", f.read(5))
    sectors = []
    for _ in range(nsec):
        (parity,) = struct.unpack("<B", f.read(1))
        u1 = struct.unpack(f"<{n_u1}q", f.read(8 * n_u1)) if n_u1 else ()
        (degen,) = struct.unpack("<Q", f.read(8))
        sectors.append(((parity,) + tuple(u1), degen))
    return GradedSpace(sectors, bool(dual))


def dump_tensor(t: GradedTensor, f) -> None:
    n_u1 = len(t.legs[0].sectors[0][0]) - 1 if t.legs else 0
    f.write(MAGIC)
    f.write(struct.pack("<HHH", VERSION, n_u1, t.nlegs))
    for leg in t.legs:
        _write_leg(f, leg)
    index = [
        {charge: i for i, (charge, _) in enumerate(leg.sectors)} for leg in t.legs
    ]
    keys = sorted(t.blocks)
    f.write(struct.pack("<Q", len(keys)))
    for key in keys:
        for k, charge in enumerate(key):
            f.write(struct.pack("<I", index[k][charge]))
        arr = np.ascontiguousarray(t.blocks[key], dtype="<c16")
        f.write(arr.tobytes())


def load_tensor_from(f) -> GradedTensor:
    if f.read(4) != MAGIC:
        raise ValueError("not a graded tensor container")
    version, n_u1, nlegs = struct.unpack("<HHH", f.read(6))
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    legs = tuple(_read_leg(f, n_u1) for _ in range(nlegs))
    (nblocks,) = struct.unpack("<Q", f.read(8))
    blocks = {}
    for _ in range(nblocks):
        idx = struct.unpack(f"<{nlegs}I", f.read(4 * nlegs))
        key = tuple(legs[k].sectors[i][0] for k, i in enumerate(idx))
        shape = tuple(legs[k].sectors[i][1] for k, i in enumerate(idx))
        count = int(np.prod(shape)) if shape else 1
        buf = f.read(16 * count)
        blocks[key] = np.frombuffer(buf, dtype="<c16").reshape(shape).copy()
    return GradedTensor(legs, blocks, validate=False)


def save_tensor(t: GradedTensor, path) -> None:
    with open(path, "wb") as f:
        dump_tensor(t, f)


def load_tensor(path) -> GradedTensor:
    with open(path, "rb") as f:
        return load_tensor_from(f)


def save_tensors(tensors, path) -> None:
    """A checkpoint is just a counted sequence of tensor containers."""
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(tensors)))
        for t in tensors:
            dump_tensor(t, f)


def load_tensors(path) -> list:
    with open(path, "rb") as f:
        (n,) = struct.unpack("<Q", f.read(8))
        return [load_tensor_from(f) for _ in range(n)]


def tensor_bytes(t: GradedTensor) -> bytes:
    buf = io.BytesIO()
    dump_tensor(t, buf)
    return buf.getvalue()


def tensor_from_bytes(data: bytes) -> GradedTensor:
    return load_tensor_from(io.BytesIO(data))
