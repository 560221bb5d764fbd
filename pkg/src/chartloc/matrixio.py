"""CCMX: a small binary container for real matrices (features, raw and
geodesic dissimilarities).

    magic b"CCMX" | u16 version=1 | u32 header_len | header JSON (UTF-8) |
    rows * cols float32, row-major, little-endian

The header carries {"kind", "rows", "cols", "meta"}; kind names what the
matrix is ("features", "dissimilarity_matrix", "geodesic_matrix") and meta
holds producer parameters such as the normalizer stats id.
"""

import json

import numpy as np

MAGIC = b"CCMX"
VERSION = 1


def write_matrix(path, values, kind, meta=None):
    v = np.asarray(values)
    if v.ndim != 2:
        raise ValueError("expected a 2-D matrix, got %d axes" % v.ndim)
    header = {"kind": str(kind), "rows": int(v.shape[0]), "cols": int(v.shape[1]),
              "meta": meta or {}}
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.array([VERSION], dtype="<u2").tobytes())
        f.write(np.array([len(blob)], dtype="<u4").tobytes())
        f.write(blob)
        f.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def read_matrix(path, expect_kind=None):
    """Returns (float64 matrix, header dict)."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise ValueError("bad matrix magic %r in %s" % (buf[:4], path))
    version = int(np.frombuffer(buf, dtype="<u2", count=1, offset=4)[0])
    if version != VERSION:
        raise ValueError("matrix container version %d unsupported" % version)
    hlen = int(np.frombuffer(buf, dtype="<u4", count=1, offset=6)[0])
    header = json.loads(buf[10:10 + hlen].decode("utf-8"))
    rows, cols = int(header["rows"]), int(header["cols"])
    need = 10 + hlen + 4 * rows * cols
    if len(buf) != need:
        raise ValueError("matrix payload is %d bytes, expected %d"
                         % (len(buf) - 10 - hlen, 4 * rows * cols))
    if expect_kind is not None and header.get("kind") != expect_kind:
        raise ValueError("matrix kind %r, expected %r" % (header.get("kind"), expect_kind))
    values = np.frombuffer(buf, dtype="<f4", count=rows * cols,
                           offset=10 + hlen).reshape(rows, cols)
    return values.astype(np.float64), header
