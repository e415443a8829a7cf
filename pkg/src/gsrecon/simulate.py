"""Ground-truth generators, measurement synthesis and training sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bases import BasisMatrix
from .fpca import TrainingSet
from .gs import MeasurementSet
from .grid import FieldSample, Grid, inner, norm

# Gaussian bump mixtures (centre u0, width s0, weight) for exp(-(u-u0)^2/s0).
# Each component pairs one broad bump, which keeps the components distinct
# at low frequencies, with one or two narrow bumps that only fine scales
# resolve.  Every bump is below 1e-6 at u=0 and u=1, so the functions are
# close to smooth when periodised.  The raw mixtures are orthonormalised in order.
BUMP_TABLE = (
    ((0.528, 0.00690, 1.0), (0.154, 0.00078, 0.74)),
    ((0.466, 0.00570, 1.0), (0.322, 0.00140, 1.36)),
    ((0.375, 0.00310, 1.0), (0.850, 0.00140, 1.11)),
    ((0.469, 0.00530, 1.0), (0.675, 0.00166, -1.07), (0.672, 0.00186, 0.94)),
    ((0.487, 0.00740, 1.0), (0.751, 0.00156, 1.36)),
    ((0.708, 0.00210, 1.0), (0.195, 0.00136, 0.54)),
    ((0.477, 0.00750, 1.0), (0.194, 0.00108, 0.74), (0.171, 0.00178, 1.37)),
    ((0.482, 0.00680, 1.0), (0.640, 0.00172, 1.39)),
    ((0.560, 0.00350, 1.0), (0.377, 0.00148, -1.26), (0.590, 0.00074, 0.55)),
    ((0.389, 0.00290, 1.0), (0.428, 0.00158, -1.42), (0.765, 0.00118, 0.50)),
)

# Modified Shepp-Logan ellipses: intensity, semi-axis a, semi-axis b,
# centre x, centre y, rotation (degrees), on the square [-1,1]^2.
SHEPP_LOGAN_E0 = np.array([
    [1.0, 0.6900, 0.9200, 0.00, 0.0000, 0.0],
    [-0.8, 0.6624, 0.8740, 0.00, -0.0184, 0.0],
    [-0.2, 0.1100, 0.3100, 0.22, 0.0000, -18.0],
    [-0.2, 0.1600, 0.4100, -0.22, 0.0000, 18.0],
    [0.1, 0.2100, 0.2500, 0.00, 0.3500, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, 0.1000, 0.0],
    [0.1, 0.0460, 0.0460, 0.00, -0.1000, 0.0],
    [0.1, 0.0460, 0.0230, -0.08, -0.6050, 0.0],
    [0.1, 0.0230, 0.0230, 0.00, -0.6060, 0.0],
    [0.1, 0.0230, 0.0460, 0.06, -0.6050, 0.0],
])
SHEPP_LOGAN_E0.flags.writeable = False

# Per-column deviation of the ellipse perturbation at scale = 1.
PERTURBATION_SCALE = np.array([0.16, 0.16, 0.16, 0.16, 0.16, 40.0])
MIN_SEMI_AXIS = 0.005


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    sigma_tilde: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.sigma_tilde < 0:
            raise ValueError("noise deviations must be nonnegative")


# -- 1D low-rank Gaussian model -------------------------------------------------


@dataclass(frozen=True)
class GenerativeModel1D:
    grid: Grid
    eigvals: np.ndarray
    fpcs: np.ndarray  # m0 x N, orthonormal under grid quadrature

    @property
    def m0(self) -> int:
        return len(self.eigvals)

    def fpc(self, j: int) -> FieldSample:
        return FieldSample(self.grid, self.fpcs[j])

    def __call__(self, rng) -> FieldSample:
        return draw_1d(self, rng)


def bump_mixture(u, bumps):
    return sum(w * np.exp(-((u - u0) ** 2) / s0) for u0, s0, w in bumps)


def gaussian_model_1d(grid: Grid, m0: int = 10) -> GenerativeModel1D:
    """Rank-m0 model with eigenvalues m0, m0-1, ..., 1."""
    if grid.dim != 1:
        raise ValueError("the bump model lives on a 1D grid")
    if not 1 <= m0 <= len(BUMP_TABLE):
        raise ValueError(f"m0 must lie in [1, {len(BUMP_TABLE)}]")
    u = grid.nodes()
    fpcs = []
    for bumps in BUMP_TABLE[:m0]:
        f = FieldSample(grid, bump_mixture(u, bumps))
        for _ in range(2):  # re-orthogonalise once for stability
            for prev in fpcs:
                f = f - prev * inner(f, prev).real
        fpcs.append(f * (1.0 / norm(f)))
    arr = np.stack([f.values for f in fpcs])
    arr.flags.writeable = False
    eigvals = np.arange(m0, 0, -1, dtype=float)
    eigvals.flags.writeable = False
    return GenerativeModel1D(grid, eigvals, arr)


def draw_1d(model: GenerativeModel1D, rng, xi=None) -> FieldSample:
    """One realisation sum_j sqrt(lambda_j) xi_j phi_j with xi_j ~ N(0,1)."""
    if xi is None:
        xi = rng.standard_normal(model.m0)
    xi = np.asarray(xi, dtype=float)
    return FieldSample(model.grid, (np.sqrt(model.eigvals) * xi) @ model.fpcs)


# -- 2D ellipse phantoms ----------------------------------------------------------


def _check_ellipses(E):
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or (E.size and E.shape[1] != 6):
        raise ValueError(f"ellipse matrix must have 6 columns, got shape {E.shape}")
    if E.size and np.any(E[:, 1:3] <= 0):
        raise ValueError("semi-axes must be positive")
    return E.reshape(-1, 6)


def phantom(E, grid: Grid) -> FieldSample:
    """Rasterise ellipses on a 2D grid; overlapping intensities add up.

    Node ``(u, v)`` maps to the point ``(x, y) = (2u - 1, 2v - 1)``.
    """
    if grid.dim != 2:
        raise ValueError("phantoms need a 2D grid")
    E = _check_ellipses(E)
    U, V = grid.nodes()
    x, y = 2 * U - 1, 2 * V - 1
    img = np.zeros(grid.shape)
    for A, a, b, x0, y0, phi in E:
        th = np.deg2rad(phi)
        c, s = np.cos(th), np.sin(th)
        dx, dy = x - x0, y - y0
        inside = ((dx * c + dy * s) / a) ** 2 + ((dy * c - dx * s) / b) ** 2 <= 1.0
        img[inside] += A
    return FieldSample(grid, img)


def perturb_ellipses(E0, rng, scale: float) -> np.ndarray:
    """Add N(0, (scale * PERTURBATION_SCALE[col])^2) noise to every entry.

    Semi-axes are clamped to at least MIN_SEMI_AXIS and centres to [-1, 1].
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    E0 = _check_ellipses(E0)
    if scale == 0:
        return E0.copy()
    E = E0 + rng.standard_normal(E0.shape) * (scale * PERTURBATION_SCALE)
    E[:, 1:3] = np.maximum(E[:, 1:3], MIN_SEMI_AXIS)
    E[:, 3:5] = np.clip(E[:, 3:5], -1.0, 1.0)
    return E


class PhantomGenerator:
    """Draws phantoms from randomly perturbed copies of a base ellipse table."""

    def __init__(self, grid: Grid, scale: float = 0.05, E0=SHEPP_LOGAN_E0):
        self.grid = grid
        self.scale = scale
        self.E0 = _check_ellipses(E0)

    def __call__(self, rng) -> FieldSample:
        return phantom(perturb_ellipses(self.E0, rng, self.scale), self.grid)


# -- measurements and training sets -------------------------------------------------


def complex_noise(rng, sigma: float, size) -> np.ndarray:
    """Complex Gaussian with real and imaginary parts each N(0, sigma^2/2)."""
    s = sigma / np.sqrt(2.0)
    return rng.normal(0.0, s, size) + 1j * rng.normal(0.0, s, size)


def measure(f: FieldSample, basis: BasisMatrix, sigma: float = 0.0, rng=None) -> MeasurementSet:
    """Noisy samples ``<f, psi_k> + w_k`` with complex noise of variance sigma^2."""
    if f.grid != basis.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {basis.grid}")
    values = np.asarray(basis.analyze(f.values), dtype=complex)
    if sigma > 0:
        if rng is None:
            raise ValueError("a random generator is needed when sigma > 0")
        values = values + complex_noise(rng, sigma, values.shape)
    return MeasurementSet(values, basis.spec, float(sigma))


def make_training_set(generator, n: int, rec_basis: BasisMatrix, sigma_tilde: float,
                      rng, complex_valued: bool = False) -> TrainingSet:
    """Rows ``analyze(f_i) + z_i`` for n draws ``f_i = generator(rng)``.

    The noise is real N(0, sigma_tilde^2) per entry unless ``complex_valued``,
    in which case it is complex with the same total variance.
    """
    if n < 2:
        raise ValueError("a training set needs n >= 2")
    fields = np.stack([np.asarray(generator(rng).values) for _ in range(n)])
    X = rec_basis.analyze(fields)
    if sigma_tilde > 0:
        if complex_valued:
            X = X + complex_noise(rng, sigma_tilde, X.shape)
        else:
            X = X + rng.normal(0.0, sigma_tilde, X.shape)
    return TrainingSet(X, rec_basis.spec, float(sigma_tilde))
