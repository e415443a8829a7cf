"""Sampling and reconstruction families on a grid.

Three families are supported:

* ``fourier``: atoms ``u -> exp(i 2 pi (k - floor(q/2)) u)`` for k = 1..q
  (tensor products with ``floor(sqrt(q)/2)`` offsets in 2D).
* ``wavelet``: periodised orthonormal Daubechies wavelets with ``s`` vanishing
  moments, obtained from the inverse discrete wavelet transform at grid
  resolution and scaled by ``1/sqrt(du)``.  Coefficients are ordered
  coarsest first; the first ``p`` of them span the multiresolution space of
  dimension ``p``.  2D uses the separable (Mallat) decomposition with each
  level stored as its H, V, D subbands, every subband flattened row-major.
* ``pixel``: raw indicators of a regular partition into ``count`` cells.

Atoms are never stored unless asked for; analysis and synthesis go through
FFTs, the DWT or block sums, which keeps the 2D case (65536 nodes, 4096 atoms)
within memory.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pywt

from .grid import FieldSample, Grid

# Periodized transforms stay exact at every level; pywt still warns once a
# filter outgrows the signal.  A module-level filter is used because
# catch_warnings() is not thread-safe.
warnings.filterwarnings("ignore", message="Level value of .* is too high",
                        category=UserWarning)

FAMILIES = ("fourier", "wavelet", "pixel")


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class BasisSpec:
    family: str
    count: int
    dim: int = 1
    s: int = 1
    boundary_mode: str = "periodic"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.count < 1:
            raise ValueError(f"count must be positive, got {self.count}")
        if self.family == "wavelet":
            if not 1 <= self.s <= 10:
                raise ValueError(f"unsupported wavelet order s={self.s} (need 1..10)")
            if self.boundary_mode != "periodic":
                raise ValueError(
                    f"unsupported boundary mode {self.boundary_mode!r}; only 'periodic'"
                )
            side = self.per_axis_count
            if not _is_pow2(side) or side ** self.dim != self.count:
                kind = "power of 2" if self.dim == 1 else "power of 4"
                raise ValueError(f"wavelet count must be a {kind}, got {self.count}")
        elif self.dim == 2 and math.isqrt(self.count) ** 2 != self.count:
            raise ValueError(
                f"2D {self.family} count must be a perfect square, got {self.count}"
            )

    @property
    def per_axis_count(self) -> int:
        return self.count if self.dim == 1 else math.isqrt(self.count)

    @property
    def riesz_bounds(self) -> tuple[float, float]:
        """(r1, r2) in the squared convention r1|b|^2 <= |sum b_k psi_k|^2 <= r2|b|^2."""
        if self.family == "pixel":
            return (1.0 / self.count, 1.0 / self.count)
        return (1.0, 1.0)

    def frequencies(self) -> np.ndarray:
        """Per-axis Fourier frequencies k - floor(n/2), k = 1..n."""
        n = self.per_axis_count
        return np.arange(1, n + 1) - n // 2


class BasisMatrix:
    """A :class:`BasisSpec` realised on a grid.

    ``analyze`` and ``synthesize`` accept leading batch dimensions.
    """

    def __init__(self, spec: BasisSpec, grid: Grid):
        if spec.dim != grid.dim:
            raise ValueError(f"basis dim {spec.dim} does not match grid dim {grid.dim}")
        side = spec.per_axis_count
        if 4 * side > grid.per_axis:
            raise ValueError(
                f"{spec.family} basis with {side} atoms per axis needs at least "
                f"{4 * side} grid points per axis, grid has {grid.per_axis}"
            )
        if spec.family == "wavelet" and not _is_pow2(grid.per_axis):
            raise ValueError("wavelet bases need a power-of-two grid per axis")
        if spec.family == "pixel" and grid.per_axis % side:
            raise ValueError(
                f"pixel partition of {side} cells per axis does not divide "
                f"{grid.per_axis} grid points"
            )
        self.spec = spec
        self.grid = grid
        if spec.family == "wavelet":
            self._wavelet = pywt.Wavelet(f"db{spec.s}")
            self._levels_total = grid.per_axis.bit_length() - 1
            self._levels_kept = side.bit_length() - 1
        if spec.family == "fourier":
            self._freqs = spec.frequencies()
            n = grid.per_axis
            self._phase = np.exp(-1j * np.pi * self._freqs / n) / n
            self._fidx = np.mod(self._freqs, n)

    def __repr__(self):
        return f"BasisMatrix({self.spec}, {self.grid})"

    @property
    def count(self) -> int:
        return self.spec.count

    @property
    def is_real(self) -> bool:
        return self.spec.family != "fourier"

    # -- analysis / synthesis on raw arrays ---------------------------------

    def analyze(self, values) -> np.ndarray:
        values = np.asarray(values)
        if not values.flags.writeable:
            values = values.copy()
        shape = self.grid.shape
        if values.shape[-len(shape):] != shape:
            values = values.reshape(values.shape[:-1] + shape)
        fam = self.spec.family
        if fam == "fourier":
            return self._fourier_analyze(values)
        if fam == "wavelet":
            return self._wavelet_analyze(values)
        return self._pixel_analyze(values)

    def synthesize(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.count:
            raise ValueError(
                f"expected {self.count} coefficients, got {coeffs.shape[-1]}"
            )
        fam = self.spec.family
        if fam == "fourier":
            return self._fourier_synthesize(coeffs)
        if fam == "wavelet":
            return self._wavelet_synthesize(coeffs)
        return self._pixel_synthesize(coeffs)

    @cached_property
    def atoms(self) -> np.ndarray:
        """Dense ``count x resolution`` matrix of atom samples (row j = atom j)."""
        eye = np.eye(self.count)
        out = self.synthesize(eye).reshape(self.count, -1)
        out.flags.writeable = False
        return out

    def gram(self) -> np.ndarray:
        a = self.atoms
        return (a.conj() @ a.T) * self.grid.du

    # -- fourier -------------------------------------------------------------

    def _fourier_analyze(self, values):
        if self.grid.dim == 1:
            spec = np.fft.fft(values, axis=-1)
            return spec[..., self._fidx] * self._phase
        spec = np.fft.fft2(values, axes=(-2, -1))
        sub = spec[..., self._fidx[:, None], self._fidx[None, :]]
        sub = sub * self._phase[:, None] * self._phase[None, :]
        return sub.reshape(sub.shape[:-2] + (-1,))

    def _fourier_exps(self):
        x = self.grid.axis_nodes()
        return np.exp(2j * np.pi * np.outer(self._freqs, x))

    def _fourier_synthesize(self, coeffs):
        e = self._fourier_exps()
        if self.grid.dim == 1:
            return coeffs @ e
        n = self.spec.per_axis_count
        c = coeffs.reshape(coeffs.shape[:-1] + (n, n))
        return np.einsum("...kj,ku,jv->...uv", c, e, e, optimize=True)

    # -- wavelets ------------------------------------------------------------

    def _level_sizes(self):
        j = self._levels_kept
        return [1] + [2 ** i for i in range(j)]

    def _wavelet_analyze(self, values):
        w, drop, keep = self._wavelet, self._levels_total - self._levels_kept, self._levels_kept
        scale = 1.0 / math.sqrt(self.grid.resolution)
        if self.grid.dim == 1:
            approx = values
            if drop:
                approx = pywt.wavedec(approx, w, mode="periodization", level=drop, axis=-1)[0]
            parts = (
                pywt.wavedec(approx, w, mode="periodization", level=keep, axis=-1)
                if keep
                else [approx]
            )
            return np.concatenate(parts, axis=-1) * scale
        axes = (-2, -1)
        approx = values
        if drop:
            approx = pywt.wavedec2(approx, w, mode="periodization", level=drop, axes=axes)[0]
        parts = (
            pywt.wavedec2(approx, w, mode="periodization", level=keep, axes=axes)
            if keep
            else [approx]
        )
        lead = values.shape[:-2]
        flat = [parts[0].reshape(lead + (-1,))]
        for details in parts[1:]:
            flat.extend(d.reshape(lead + (-1,)) for d in details)
        return np.concatenate(flat, axis=-1) * scale

    def _wavelet_synthesize(self, coeffs):
        w, drop, keep = self._wavelet, self._levels_total - self._levels_kept, self._levels_kept
        scale = math.sqrt(self.grid.resolution)
        lead = coeffs.shape[:-1]
        sizes = self._level_sizes()
        if self.grid.dim == 1:
            parts = np.split(coeffs, np.cumsum(sizes)[:-1], axis=-1)
            approx = (
                pywt.waverec(parts, w, mode="periodization", axis=-1) if keep else parts[0]
            )
            if drop:
                approx = pywt.waverec(
                    [approx] + [None] * drop, w, mode="periodization", axis=-1
                )
            return approx * scale
        axes = (-2, -1)
        pos = 1
        parts = [coeffs[..., :1].reshape(lead + (1, 1))]
        for n in sizes[1:]:
            band = []
            for _ in range(3):
                band.append(coeffs[..., pos:pos + n * n].reshape(lead + (n, n)))
                pos += n * n
            parts.append(tuple(band))
        approx = (
            pywt.waverec2(parts, w, mode="periodization", axes=axes) if keep else parts[0]
        )
        if drop:
            approx = pywt.waverec2(
                [approx] + [(None, None, None)] * drop, w, mode="periodization", axes=axes
            )
        return approx * scale

    # -- pixels --------------------------------------------------------------

    def _pixel_analyze(self, values):
        m = self.spec.per_axis_count
        b = self.grid.per_axis // m
        du = self.grid.du
        if self.grid.dim == 1:
            return values.reshape(values.shape[:-1] + (m, b)).sum(-1) * du
        lead = values.shape[:-2]
        blocks = values.reshape(lead + (m, b, m, b)).sum(axis=(-3, -1)) * du
        return blocks.reshape(lead + (-1,))

    def _pixel_synthesize(self, coeffs):
        m = self.spec.per_axis_count
        b = self.grid.per_axis // m
        if self.grid.dim == 1:
            return np.repeat(coeffs, b, axis=-1)
        c = coeffs.reshape(coeffs.shape[:-1] + (m, m))
        return np.repeat(np.repeat(c, b, axis=-2), b, axis=-1)


def build_basis(spec: BasisSpec, grid: Grid) -> BasisMatrix:
    return BasisMatrix(spec, grid)


def analyze(f: FieldSample, basis: BasisMatrix) -> np.ndarray:
    """Coefficients ``<f, atom_j>`` under grid quadrature."""
    if f.grid != basis.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {basis.grid}")
    return basis.analyze(f.values)


def synthesize(coeffs, basis: BasisMatrix) -> FieldSample:
    coeffs = np.asarray(coeffs)
    if coeffs.shape != (basis.count,):
        raise ValueError(f"expected {basis.count} coefficients, got shape {coeffs.shape}")
    return FieldSample(basis.grid, basis.synthesize(coeffs))


def cross_gram(rec: BasisMatrix, samp: BasisMatrix) -> np.ndarray:
    """Direct quadrature assembly of the q x p matrix ``<rec_l, samp_k>``."""
    if rec.grid != samp.grid:
        raise ValueError(f"grid mismatch: {rec.grid} vs {samp.grid}")
    return (samp.atoms.conj() @ rec.atoms.T) * rec.grid.du


def assemble_cross_gram(rec: BasisMatrix, samp: BasisMatrix, chunk: int = 128) -> np.ndarray:
    """Cross-Gramian through the sampling family's fast analysis.

    Column l is ``samp.analyze(rec atom l)``; atoms are synthesised ``chunk``
    at a time so the dense atom matrix is never formed.
    """
    if rec.grid != samp.grid:
        raise ValueError(f"grid mismatch: {rec.grid} vs {samp.grid}")
    p = rec.count
    dtype = np.float64 if (rec.is_real and samp.is_real) else np.complex128
    out = np.empty((samp.count, p), dtype=dtype)
    for start in range(0, p, chunk):
        stop = min(start + chunk, p)
        eye = np.zeros((stop - start, p))
        eye[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out[:, start:stop] = samp.analyze(rec.synthesize(eye)).T
    return out


def cross_gram_fft(rec: BasisMatrix, samp_spec: BasisSpec, chunk: int = 128) -> np.ndarray:
    """Cross-Gramian against a Fourier family via the DFT of each atom."""
    if samp_spec.family != "fourier":
        raise ValueError(f"cross_gram_fft needs a fourier sampling spec, got {samp_spec.family!r}")
    return assemble_cross_gram(rec, BasisMatrix(samp_spec, rec.grid), chunk=chunk)
