"""Versioned binary model container shared by the neural tagger and the
HMM baseline: magic, format version, JSON header, named float64 tensors.

Layout (all integers little-endian):
  8-byte magic | uint32 version | uint32 header length | header (UTF-8 JSON)
  | uint32 tensor count | per tensor:
      uint32 name length | name (UTF-8) | uint32 ndim | uint64 dims...
      | float64 data (C order)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

FORMAT_VERSION = 1


class ContainerError(Exception):
    pass


def write_container(
    path: Union[str, Path],
    magic: bytes,
    header: dict,
    tensors: dict[str, np.ndarray],
) -> None:
    if len(magic) != 8:
        raise ContainerError("magic must be 8 bytes")
    raw_header = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(raw_header)))
        fh.write(raw_header)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path: Union[str, Path], magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        got = fh.read(8)
        if got != magic:
            raise ContainerError(f"bad magic: expected {magic!r}, got {got!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ContainerError(f"unsupported format version {version} (expected {FORMAT_VERSION})")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            tensors[name] = np.frombuffer(fh.read(8 * size), dtype="<f8").reshape(shape).copy()
    return header, tensors
