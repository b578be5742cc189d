"""Binary grid files and CSV emitters shared by the command-line tools.

The grid format is deliberately small: a magic string, a fixed little-endian
header (dimension, component count, a convention tag, per-axis counts, origin
and spacing), then the payload as float64 (real, imaginary) pairs, component
major and C-ordered over the axes.  Every multi-dimensional array the
pipeline produces (field samples, spectra, sinograms) fits this shape, and
the byte layout is a pure function of the data, which keeps reruns
byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, GridFormatError, TruncatedPayload
from .raytransform import Sinogram

MAGIC = b"LRGF1"
_HEAD = struct.Struct("<III")        # dimension, component count, tag length
MAX_DIM = 16
MAX_TAG = 4096


@dataclass
class GridData:
    """In-memory image of a grid file."""

    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray          # (ncomp, *counts) complex
    convention: str

    @property
    def counts(self) -> tuple[int, ...]:
        return self.values.shape[1:]


def grid_bytes(origin, spacing, values, convention: str) -> bytes:
    """Serialize one grid; values is (ncomp, *counts), any numeric dtype."""
    origin = np.asarray(origin, dtype="<f8")
    spacing = np.asarray(spacing, dtype="<f8")
    values = np.ascontiguousarray(values, dtype="<c16")
    dim = values.ndim - 1
    if dim < 1 or origin.shape != (dim,) or spacing.shape != (dim,):
        raise GridFormatError("origin, spacing and value axes must agree")
    tag = convention.encode("ascii")
    if len(tag) > MAX_TAG:
        raise GridFormatError("convention tag too long")
    parts = [
        MAGIC,
        _HEAD.pack(dim, values.shape[0], len(tag)),
        tag,
        np.asarray(values.shape[1:], dtype="<u8").tobytes(),
        origin.tobytes(),
        spacing.tobytes(),
        values.tobytes(),
    ]
    return b"".join(parts)


def write_grid(path, origin, spacing, values, convention: str) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_bytes(origin, spacing, values, convention))


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    if offset + size > len(buf):
        raise TruncatedPayload(f"grid file ends inside the {what}")
    return buf[offset:offset + size], offset + size


def grid_from_bytes(buf: bytes) -> GridData:
    head, off = _take(buf, 0, len(MAGIC), "magic")
    if head != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {head!r}")
    raw, off = _take(buf, off, _HEAD.size, "header")
    dim, ncomp, tag_len = _HEAD.unpack(raw)
    if not 1 <= dim <= MAX_DIM:
        raise GridFormatError(f"implausible dimension {dim}")
    if ncomp < 1:
        raise GridFormatError("component count must be positive")
    if tag_len > MAX_TAG:
        raise GridFormatError("convention tag too long")
    raw, off = _take(buf, off, tag_len, "convention tag")
    try:
        convention = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise GridFormatError("convention tag is not ascii") from exc
    raw, off = _take(buf, off, 8 * dim, "axis counts")
    counts = np.frombuffer(raw, dtype="<u8")
    if np.any(counts == 0) or int(counts.prod()) > 2**40:
        raise GridFormatError("implausible axis counts")
    raw, off = _take(buf, off, 8 * dim, "origin")
    origin = np.frombuffer(raw, dtype="<f8").copy()
    raw, off = _take(buf, off, 8 * dim, "spacing")
    spacing = np.frombuffer(raw, dtype="<f8").copy()
    payload = 2 * 8 * ncomp * int(counts.prod())
    raw, off = _take(buf, off, payload, "payload")
    if off != len(buf):
        raise GridFormatError("trailing bytes after the payload")
    values = np.frombuffer(raw, dtype="<c16").reshape(
        (ncomp,) + tuple(int(c) for c in counts)
    ).copy()
    return GridData(origin=origin, spacing=spacing, values=values, convention=convention)


def read_grid(path) -> GridData:
    with open(path, "rb") as fh:
        return grid_from_bytes(fh.read())


def fmt(x) -> str:
    """17-significant-digit, locale-independent number formatting."""
    return format(float(x), ".17g")


def sinogram_csv(sino: Sinogram) -> str:
    """Sinogram table: x components, direction components, value, error.

    Rows run C-ordered over the x lattice, direction fastest.  The value of
    a withheld ray is written as zero, same as it is stored.
    """
    acq = sino.acq
    n = acq.n
    pts = acq.x_points()
    ndir = acq.n_dirs
    vals = np.asarray(sino.values, dtype=complex).reshape(-1, ndir)
    err_cell = fmt(sino.max_error)
    header = (
        [f"x{ax + 1}" for ax in range(n)]
        + [f"theta{ax + 1}" for ax in range(n)]
        + ["re", "im", "quad_error"]
    )
    dir_cells = [",".join(fmt(v) for v in acq.directions[k]) for k in range(ndir)]
    lines = [",".join(header)]
    for r in range(pts.shape[0]):
        xc = ",".join(fmt(v) for v in pts[r])
        row = vals[r]
        for k in range(ndir):
            lines.append(
                f"{xc},{dir_cells[k]},{fmt(row[k].real)},{fmt(row[k].imag)},{err_cell}"
            )
    return "\n".join(lines) + "\n"


def sinogram_grid_bytes(sino: Sinogram) -> bytes:
    """Sinogram as a grid file: axes = x lattice, components = directions."""
    acq = sino.acq
    vals = np.moveaxis(
        np.asarray(sino.values, dtype=complex).reshape(acq.x_counts + (acq.n_dirs,)),
        -1,
        0,
    )
    return grid_bytes(acq.x_origin, acq.x_spacing, vals, "sinogram")
