"""Generalized-sampling solvers and conditioning diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bases import BasisMatrix, BasisSpec
from .grid import FieldSample

ILL_POSED_TOL = 1e-12
METHODS = ("least_squares", "ridge", "lasso")


class IllPosedError(ValueError):
    """Raised when a system matrix is numerically rank deficient."""

    def __init__(self, sigma_min: float, what: str = "system matrix"):
        self.sigma_min = float(sigma_min)
        super().__init__(
            f"{what} is ill-posed: sigma_min = {self.sigma_min:.3e} "
            f"(threshold {ILL_POSED_TOL:g}); the sampling and reconstruction "
            "spaces are too far apart for a stable reconstruction"
        )


@dataclass(frozen=True)
class MeasurementSet:
    values: np.ndarray
    sampling_spec: BasisSpec
    noise_sigma: float = 0.0

    def __post_init__(self):
        if len(self.values) != self.sampling_spec.count:
            raise ValueError(
                f"{len(self.values)} measurements for a sampling family of "
                f"{self.sampling_spec.count} atoms"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "least_squares"
    lam: float = 0.0
    weights: Optional[np.ndarray] = None
    max_iters: int = 5000
    tol: float = 1e-10
    truncation_tau: Optional[float] = None
    allow_rank_deficient: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.weights is not None and np.any(np.asarray(self.weights) <= 0):
            raise ValueError("ridge weights must be strictly positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.truncation_tau is not None and self.truncation_tau <= 0:
            raise ValueError("truncation_tau must be positive")


def sigma_min(A) -> float:
    """sqrt(lambda_min(A^* A)); zero for wide matrices."""
    A = np.atleast_2d(np.asarray(A))
    rows, cols = A.shape
    if cols == 0:
        return 0.0
    if rows < cols:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def real_stack(A) -> np.ndarray:
    """The real 2x2 block form [[Re A, -Im A], [Im A, Re A]]."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def solve_ls(A, b, allow_rank_deficient: bool = False) -> np.ndarray:
    """Least-squares solution of ``A a = b`` via the SVD.

    With ``allow_rank_deficient`` the minimum-norm solution is returned for
    ill-posed systems instead of raising :class:`IllPosedError`.
    """
    A = np.atleast_2d(np.asarray(A))
    b = np.asarray(b)
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
    x, _, _, sv = np.linalg.lstsq(A, b, rcond=None)
    smin = float(sv[-1]) if A.shape[0] >= A.shape[1] and len(sv) else 0.0
    if smin < ILL_POSED_TOL and not allow_rank_deficient:
        raise IllPosedError(smin)
    return x


def solve_ridge(A, b, lam: float, weights=None) -> np.ndarray:
    """Minimise |A a - b|^2 + lam * sum_j w_j |a_j|^2."""
    A = np.atleast_2d(np.asarray(A))
    b = np.asarray(b)
    q, p = A.shape
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (p,):
        raise ValueError(f"expected {p} weights, got shape {w.shape}")
    if np.any(w <= 0):
        raise ValueError("ridge weights must be strictly positive")
    if lam == 0:
        return solve_ls(A, b)
    if q < p:
        # dual form: a = W^-1 A^* (A W^-1 A^* + lam I)^-1 b
        AW = A / w
        K = AW @ A.conj().T + lam * np.eye(q)
        return AW.conj().T @ np.linalg.solve(K, b)
    aug = np.vstack([A, np.diag(np.sqrt(lam * w)).astype(A.dtype)])
    rhs = np.concatenate([b, np.zeros(p, dtype=b.dtype)])
    return np.linalg.lstsq(aug, rhs, rcond=None)[0]


def l1_objective(A, b, x, lam: float) -> float:
    r = A @ x - b
    return float(np.vdot(r, r).real + lam * np.abs(x).sum())


def soft_threshold(z, t):
    """Complex soft-thresholding: shrink magnitudes by t, keep the phase."""
    mag = np.abs(z)
    scale = np.maximum(1.0 - t / np.where(mag > 0, mag, 1.0), 0.0)
    return z * scale


def solve_l1(A, b, lam: float, max_iters: int = 5000, tol: float = 1e-10,
             x0=None, history: Optional[list] = None) -> np.ndarray:
    """Proximal gradient for |A a - b|^2 + lam * sum_j |a_j| (no 1/2 factor).

    The objective is non-increasing: a step that would increase it is retried
    with half the step size.  Iteration stops once the relative objective
    change drops below ``tol``.
    """
    if lam <= 0:
        raise ValueError("solve_l1 needs lam > 0")
    A = np.atleast_2d(np.asarray(A))
    b = np.asarray(b)
    dtype = np.result_type(A, b, float)
    x = np.zeros(A.shape[1], dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)
    lip = 2.0 * np.linalg.norm(A, 2) ** 2
    if lip == 0:
        return x
    step = 1.0 / lip
    obj = l1_objective(A, b, x, lam)
    if history is not None:
        history.append(obj)
    for _ in range(max_iters):
        grad = 2.0 * (A.conj().T @ (A @ x - b))
        while True:
            x_new = soft_threshold(x - step * grad, step * lam)
            obj_new = l1_objective(A, b, x_new, lam)
            if obj_new <= obj * (1 + 1e-14) + 1e-300:
                break
            step *= 0.5
            if step < 1e-30 / lip:
                raise FloatingPointError("solve_l1: step size underflow")
        change = abs(obj - obj_new) / max(abs(obj), 1e-300)
        x, obj = x_new, obj_new
        if history is not None:
            history.append(obj)
        if change < tol:
            break
    return x


def _as_rows(X, du):
    if isinstance(X, BasisMatrix):
        return X.atoms, X.grid.du
    X = np.atleast_2d(np.asarray(X))
    return X, du


def _check_orthonormal(X, du, name):
    gram = (X.conj() @ X.T) * du
    dev = np.abs(gram - np.eye(len(X))).max()
    if dev > 1e-6:
        raise ValueError(f"{name} is not orthonormal (max Gram deviation {dev:.2e})")


def subspace_cos(U, V, du: float = 1.0) -> float:
    """cos of the largest principal angle from span U into span V.

    U and V are orthonormal sets given as :class:`BasisMatrix` objects or as
    arrays whose rows are vectors; ``du`` is the quadrature weight for arrays
    (1 for plain coefficient vectors).
    """
    U, du_u = _as_rows(U, du)
    V, du_v = _as_rows(V, du)
    if du_u != du_v:
        raise ValueError("U and V use different quadrature weights")
    _check_orthonormal(U, du_u, "U")
    _check_orthonormal(V, du_v, "V")
    M = (V.conj() @ U.T) * du_u  # |V| x |U|, entry (j, i) = <u_i, v_j>
    return min(sigma_min(M), 1.0)


def subspace_sin(U, V, du: float = 1.0) -> float:
    c = subspace_cos(U, V, du)
    return math.sqrt(max(0.0, 1.0 - c * c))


def truncate(f: FieldSample, tau: float) -> FieldSample:
    """Pointwise magnitude clipping at tau with the phase preserved."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    v = f.values
    mag = np.abs(v)
    scale = np.minimum(1.0, tau / np.where(mag > 0, mag, 1.0))
    return FieldSample(f.grid, v * scale)
