"""Matrix and frame files.

Matrices are stored in a small binary format: a 16-byte header (8-byte magic
``b"NCXMAT01"`` followed by ``m`` and ``n`` as little-endian uint32) and then
``m * n`` little-endian float64 values in row-major order.  Writing and
reading back is bit-exact.  Small matrices can also go through CSV with 17
significant digits, which round-trips float64 exactly as well.

Frames can be imported from binary PGM (P5) images, 8 or 16 bits per pixel.
"""

from __future__ import annotations

import os
import struct

import numpy as np

__all__ = [
    "MAGIC",
    "MatrixFormatError",
    "write_matrix",
    "read_matrix",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_pgm",
    "read_pgm",
    "frames_to_matrix",
    "matrix_to_frames",
]

MAGIC = b"NCXMAT01"
_HEADER = struct.Struct("<8sII")


class MatrixFormatError(OSError):
    """A file does not hold a valid matrix or image."""


def write_matrix(path, X):
    X = np.asarray(X, dtype="<f8")
    if X.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {X.shape}")
    m, n = X.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, m, n))
        fh.write(np.ascontiguousarray(X).tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, m, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    if len(body) != 8 * m * n:
        raise MatrixFormatError(f"{path}: expected {8 * m * n} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(m, n).astype(float)


def write_matrix_csv(path, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {X.shape}")
    np.savetxt(path, X, delimiter=",", fmt="%.17g")


def read_matrix_csv(path):
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from exc
    return X


# ---------------------------------------------------------------------------
# PGM


def _pgm_tokens(data, count):
    # header fields separated by whitespace, '#' starts a comment
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise MatrixFormatError("truncated PGM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def read_pgm(path):
    """Read a P5 image as floats in ``[0, 1]`` (divided by maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise MatrixFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: bad PGM header") from exc
    if not (w > 0 and h > 0 and 0 < maxval < 65536):
        raise MatrixFormatError(f"{path}: bad PGM header values")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = w * h * dtype.itemsize
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise MatrixFormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(float) / maxval


def write_pgm(path, frame, maxval=255):
    """Write a frame with values in ``[0, 1]`` as a P5 image."""
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2:
        raise ValueError("a frame must be 2-d")
    if not 0 < maxval < 65536:
        raise ValueError("maxval must lie in [1, 65535]")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    q = np.rint(np.clip(frame, 0.0, 1.0) * maxval).astype(dtype)
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(q.tobytes())


def frames_to_matrix(frames):
    """Stack equally sized frames as columns, each vectorized column-major."""
    frames = [np.asarray(f, dtype=float) for f in frames]
    if not frames:
        raise ValueError("no frames given")
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise ValueError("frames differ in size")
    return np.stack([f.ravel(order="F") for f in frames], axis=1)


def matrix_to_frames(X, frame_h, frame_w):
    X = np.asarray(X, dtype=float)
    return [X[:, j].reshape(frame_h, frame_w, order="F") for j in range(X.shape[1])]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
