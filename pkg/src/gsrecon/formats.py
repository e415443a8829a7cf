"""On-disk formats: flat binary matrices/fields, CSV tables and images.

Binary matrix files start with an ASCII line ``"rows cols complex"`` followed by
``rows*cols`` little-endian float64 ``(re, im)`` pairs in row-major order.
Field files use the header ``"dim N complex"`` where N is the node count.
"""
from __future__ import annotations

import csv
import os

import numpy as np

from .grid import FieldSample, Grid

_PAIR = np.dtype("<f8")


def _write_complex(fh, values):
    flat = np.asarray(values, dtype=np.complex128).ravel()
    pairs = np.empty(2 * flat.size, dtype=_PAIR)
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    fh.write(pairs.tobytes())


def _read_complex(fh, count, path):
    raw = fh.read()
    pairs = np.frombuffer(raw, dtype=_PAIR)
    if pairs.size != 2 * count:
        raise ValueError(
            f"{path}: expected {count} complex entries, found {pairs.size / 2:g}"
        )
    return pairs[0::2] + 1j * pairs[1::2]


def write_matrix(path, mat) -> None:
    mat = np.asarray(mat)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.ndim != 2:
        raise ValueError(f"matrix must be 1D or 2D, got shape {mat.shape}")
    with open(path, "wb") as fh:
        fh.write(f"{mat.shape[0]} {mat.shape[1]} complex\n".encode("ascii"))
        _write_complex(fh, mat)


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 3 or header[2] != "complex":
            raise ValueError(f"{path}: bad matrix header {' '.join(header)!r}")
        rows, cols = int(header[0]), int(header[1])
        data = _read_complex(fh, rows * cols, path)
    return data.reshape(rows, cols)


def write_field(path, f: FieldSample) -> None:
    with open(path, "wb") as fh:
        fh.write(f"{f.grid.dim} {f.grid.resolution} complex\n".encode("ascii"))
        _write_complex(fh, f.values)


def read_field(path) -> FieldSample:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 3 or header[2] != "complex":
            raise ValueError(f"{path}: bad field header {' '.join(header)!r}")
        grid = Grid(int(header[0]), int(header[1]))
        data = _read_complex(fh, grid.resolution, path)
    if not np.any(data.imag):
        data = data.real
    return FieldSample(grid, data)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return v


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_coefficients(path, coeffs) -> None:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    write_csv(
        path,
        ["index", "re", "im"],
        ((i, float(c.real), float(c.imag)) for i, c in enumerate(coeffs)),
    )


def write_pgm(path, image) -> tuple[float, float]:
    """Write a 16-bit binary PGM of ``image`` min-max scaled to 0..65535.

    The scaling ``(lo, hi)`` is returned and recorded in ``path + ".scale"``.
    """
    img = np.asarray(image, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo if hi > lo else 1.0
    data = np.round((img - lo) / span * 65535.0).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    with open(path + ".scale", "w") as fh:
        fh.write(f"min={lo!r}\nmax={hi!r}\n")
    return lo, hi


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        tokens = []
        while len(tokens) < 4:
            tokens += fh.readline().split()
        if tokens[0] != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        dt = ">u2" if maxval > 255 else "u1"
        data = np.frombuffer(fh.read(), dtype=dt)
    return data.reshape(height, width)


def write_pfm(path, image) -> None:
    """Greyscale little-endian PFM (rows stored bottom to top)."""
    img = np.asarray(image, dtype="<f4")
    if img.ndim == 1:
        img = img[None, :]
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{img.shape[1]} {img.shape[0]}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError(f"{path}: not a greyscale PFM")
        width, height = map(int, fh.readline().split())
        scale = float(fh.readline())
        dt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dt)
    return data.reshape(height, width)[::-1]


def write_keyvalue(path, items: dict) -> None:
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={value}\n")


def read_keyvalue(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
