"""Reconstruction in the span of estimated principal components.

Given the q x p cross-Gramian ``A`` of the reconstruction basis against the
sampling family, an :class:`~gsrecon.fpca.EigenModel` (mean ``mu`` and
eigenvectors ``E``) and measurements ``b``, the coefficients ``alpha`` solve

    (A E) alpha ~ b - A mu

and the estimate is ``mu + E alpha`` in the reconstruction basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gs
from .bases import BasisMatrix
from .fpca import EigenModel
from .grid import FieldSample, norm


@dataclass
class ReconstructionResult:
    alpha: np.ndarray
    coeffs_p: np.ndarray
    field: FieldSample
    diagnostics: dict = field(default_factory=dict)


def _values(b):
    return np.asarray(b.values if isinstance(b, gs.MeasurementSet) else b)


def reduced_system(A, model: EigenModel, b) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A E, b - A mu)``."""
    A = np.atleast_2d(np.asarray(A))
    b = _values(b)
    if A.shape[1] != model.p:
        raise ValueError(f"cross-Gramian has {A.shape[1]} columns, model has p={model.p}")
    if A.shape[0] != b.shape[0]:
        raise ValueError(f"cross-Gramian has {A.shape[0]} rows, got {b.shape[0]} measurements")
    return A @ model.eigvecs, b - A @ model.mean


def regularized_sigma_min(Ahat, lam: float, eigvals) -> float:
    """sqrt of the smallest eigenvalue of Ahat^* Ahat + lam diag(1/eigvals)."""
    Ahat = np.atleast_2d(np.asarray(Ahat))
    if lam == 0:
        return gs.sigma_min(Ahat)
    eigvals = np.asarray(eigvals, dtype=float)
    if np.any(eigvals <= 0):
        raise ValueError("eigenvalues must be positive when lam > 0")
    H = Ahat.conj().T @ Ahat + lam * np.diag(1.0 / eigvals)
    low = np.linalg.eigvalsh((H + H.conj().T) / 2)[0]
    return math.sqrt(max(low, 0.0))


def relative_error(fhat: FieldSample, f: FieldSample) -> float:
    if fhat.grid != f.grid:
        raise ValueError(f"grid mismatch: {fhat.grid} vs {f.grid}")
    nf = norm(f)
    if nf == 0:
        raise ValueError("relative error undefined for a zero ground truth")
    return norm(f - fhat) / nf


def _finish(alpha, coeffs, basis, cfg, diagnostics):
    values = basis.synthesize(coeffs)
    fhat = FieldSample(basis.grid, values)
    if cfg.truncation_tau is not None:
        fhat = gs.truncate(fhat, cfg.truncation_tau)
    return ReconstructionResult(alpha=alpha, coeffs_p=coeffs, field=fhat,
                                diagnostics=diagnostics)


def reconstruct(A, model: EigenModel, b, cfg: gs.SolverConfig,
                basis: BasisMatrix) -> ReconstructionResult:
    """Estimate ``mu + E alpha`` from measurements ``b``.

    ``cfg.method`` selects least squares or ridge; ridge uses the weights
    ``1/eigvals`` unless ``cfg.weights`` is given.
    """
    Ahat, rhs = reduced_system(A, model, b)
    if cfg.method == "least_squares":
        smin = gs.sigma_min(Ahat)
        if smin < gs.ILL_POSED_TOL:
            raise gs.IllPosedError(smin, "reduced system")
        alpha = gs.solve_ls(Ahat, rhs)
    elif cfg.method == "ridge":
        weights = cfg.weights
        if weights is None:
            if np.any(model.eigvals <= 0):
                raise ValueError("ridge weights 1/eigval need positive eigenvalues")
            weights = 1.0 / model.eigvals
        smin = regularized_sigma_min(Ahat, cfg.lam, 1.0 / np.asarray(weights))
        if smin < gs.ILL_POSED_TOL:
            raise gs.IllPosedError(smin, "regularized reduced system")
        alpha = gs.solve_ridge(Ahat, rhs, cfg.lam, weights)
    else:
        raise ValueError(f"GS-FPCA supports least_squares and ridge, not {cfg.method!r}")
    coeffs = model.mean + model.eigvecs @ alpha
    resid = Ahat @ alpha - rhs
    diagnostics = {
        "sigma_min_reduced": smin,
        "cos_angle_estimate": gs.sigma_min(Ahat),
        "residual_norm": float(np.linalg.norm(resid)),
    }
    return _finish(alpha, coeffs, basis, cfg, diagnostics)


def reconstruct_gs(A, b, cfg: gs.SolverConfig, basis: BasisMatrix) -> ReconstructionResult:
    """Plain generalized sampling directly in the reconstruction basis."""
    A = np.atleast_2d(np.asarray(A))
    b = _values(b)
    smin = gs.sigma_min(A)
    ill = smin < gs.ILL_POSED_TOL
    if cfg.method == "least_squares":
        coeffs = gs.solve_ls(A, b, allow_rank_deficient=cfg.allow_rank_deficient)
    elif cfg.method == "ridge":
        coeffs = gs.solve_ridge(A, b, cfg.lam, cfg.weights)
    else:
        coeffs = gs.solve_l1(A, b, cfg.lam, cfg.max_iters, cfg.tol)
    diagnostics = {
        "sigma_min": smin,
        "ill_posed": ill,
        "residual_norm": float(np.linalg.norm(A @ coeffs - b)),
    }
    return _finish(coeffs, coeffs, basis, cfg, diagnostics)
