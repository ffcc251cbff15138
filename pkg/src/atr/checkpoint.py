"""Checkpoint files: named binary records with a small typed header.

Layout (all integers little-endian):

    magic   7 bytes  b"ATRCKPT"
    version u32
    count   u64
    then per record:
        name length u32, name utf-8,
        dtype code u8 (0 float64, 1 int64, 2 uint64, 3 raw bytes),
        ndim u8, each dimension u64,
        payload (element data, little-endian; raw bytes for code 3).

Training state is stored as float64/int64/uint64 so a save/load round
trip is bit-exact; loaders reject unknown magic or version.
"""

import struct

import numpy as np

MAGIC = b"ATRCKPT"
VERSION = 1

_CODES = {0: np.dtype("<f8"), 1: np.dtype("<i8"), 2: np.dtype("<u8")}
_BYTES_CODE = 3


def _code_for(array):
    for code, dtype in _CODES.items():
        if array.dtype == dtype:
            return code
    raise TypeError(f"unsupported dtype {array.dtype}; use f8/i8/u8 or bytes")


def save_arrays(path, arrays):
    """Write a name -> ndarray/bytes mapping; insertion order is kept."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(arrays)))
        for name, value in arrays.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            if isinstance(value, (bytes, bytearray)):
                fh.write(struct.pack("<BB", _BYTES_CODE, 1))
                fh.write(struct.pack("<Q", len(value)))
                fh.write(bytes(value))
                continue
            array = np.asarray(value, order="C")
            if array.dtype == np.float32 or array.dtype == np.float64:
                array = array.astype("<f8")
            elif array.dtype == np.bool_ or np.issubdtype(array.dtype, np.signedinteger):
                array = array.astype("<i8")
            elif np.issubdtype(array.dtype, np.unsignedinteger):
                array = array.astype("<u8")
            code = _code_for(array)
            fh.write(struct.pack("<BB", code, array.ndim))
            for dim in array.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(array.tobytes())


def load_arrays(path):
    """Read a checkpoint back into a name -> ndarray/bytes dict."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        version, count = struct.unpack("<IQ", fh.read(12))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            code, ndim = struct.unpack("<BB", fh.read(2))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            if code == _BYTES_CODE:
                out[name] = fh.read(shape[0])
                continue
            dtype = _CODES[code]
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(n_items * dtype.itemsize), dtype=dtype)
            out[name] = data.reshape(shape).copy()
        return out
