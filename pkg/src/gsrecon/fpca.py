"""Sample covariance, principal components and sparse principal components."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bases import BasisSpec

SPCA_MAX_ITERS = 500
SPCA_TOL = 1e-9
TIE_TOL = 1e-10


@dataclass(frozen=True)
class TrainingSet:
    """Noisy coefficient observations, one row per training function."""

    Y: np.ndarray
    basis_spec: Optional[BasisSpec] = None
    noise_sigma_tilde: float = 0.0

    def __post_init__(self):
        Y = np.asarray(self.Y)
        if Y.ndim != 2 or Y.shape[0] < 2:
            raise ValueError(f"training matrix must be n x p with n >= 2, got {Y.shape}")
        if self.basis_spec is not None and Y.shape[1] != self.basis_spec.count:
            raise ValueError(
                f"training matrix has {Y.shape[1]} columns, basis has {self.basis_spec.count}"
            )
        if self.noise_sigma_tilde < 0:
            raise ValueError("noise_sigma_tilde must be nonnegative")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]


@dataclass
class EigenModel:
    """Mean and leading (possibly sparse) eigenvectors of a sample covariance.

    ``eigvecs`` is p x m with unit-norm columns.  Dense PCA columns are
    orthonormal; sparse PCA columns generally are not.
    """

    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    total_variance: float
    n: int = 0
    sigma_tilde: float = 0.0
    sparse_k: Optional[int] = None

    @property
    def p(self) -> int:
        return self.eigvecs.shape[0]

    @property
    def m(self) -> int:
        return self.eigvecs.shape[1]

    def truncated(self, m: int) -> "EigenModel":
        if m > self.m:
            raise ValueError(f"model has only {self.m} components, asked for {m}")
        return EigenModel(self.mean, self.eigvecs[:, :m], self.eigvals[:m],
                          self.total_variance, self.n, self.sigma_tilde, self.sparse_k)


def _matrix(T):
    return np.asarray(T.Y if isinstance(T, TrainingSet) else T)


def sample_stats(T) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and the 1/n-normalised sample covariance."""
    Y = _matrix(T)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError(f"need at least two observations, got shape {Y.shape}")
    n = Y.shape[0]
    mean = Y.mean(axis=0)
    Yc = Y - mean
    cov = Yc.T @ Yc.conj() / n
    return mean, cov


def canonical_phase(V: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant entry is real positive."""
    V = np.array(V, copy=True)
    if V.ndim == 1:
        return canonical_phase(V[:, None])[:, 0]
    for j in range(V.shape[1]):
        col = V[:, j]
        mag = np.abs(col)
        big = np.flatnonzero(mag > 1e-8 * mag.max()) if mag.max() > 0 else []
        if len(big):
            ph = col[big[0]] / mag[big[0]]
            V[:, j] = col / ph if np.iscomplexobj(V) else col * np.sign(ph)
    return V


def _order(vals, vecs):
    """Descending eigenvalue order, ties broken lexicographically on vectors."""
    order = list(np.argsort(-np.asarray(vals), kind="stable"))
    out, i = [], 0
    while i < len(order):
        j = i + 1
        while j < len(order) and vals[order[i]] - vals[order[j]] <= TIE_TOL:
            j += 1
        run = order[i:j]
        if len(run) > 1:
            run.sort(key=lambda c: (tuple(np.round(vecs[:, c].real, 12)),
                                    tuple(np.round(np.imag(vecs[:, c]), 12))), reverse=True)
        out.extend(run)
        i = j
    return out


def top_eigs(cov, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading m eigenpairs of a Hermitian matrix (eigenvectors as columns)."""
    cov = np.asarray(cov)
    p = cov.shape[0]
    if cov.shape != (p, p):
        raise ValueError(f"covariance must be square, got {cov.shape}")
    if not 0 <= m <= p:
        raise ValueError(f"m must lie in [0, {p}], got {m}")
    scale = max(np.abs(cov).max(), 1.0)
    if np.abs(cov - cov.conj().T).max() > 1e-8 * scale:
        raise ValueError("covariance matrix is not Hermitian")
    vals, vecs = np.linalg.eigh((cov + cov.conj().T) / 2)
    vals, vecs = vals[::-1], canonical_phase(vecs[:, ::-1])
    order = _order(vals, vecs)[:m]
    return vecs[:, order], vals[order]


def explained_variance(model: EigenModel, m: Optional[int] = None) -> float:
    m = model.m if m is None else m
    if model.total_variance <= 0:
        raise ValueError("explained variance undefined for zero total variance")
    if not 0 <= m <= model.m:
        raise ValueError(f"m must lie in [0, {model.m}], got {m}")
    return float(np.sum(model.eigvals[:m]) / model.total_variance)


# -- sparse PCA ---------------------------------------------------------------


def _keep_top_rows(v, k):
    if k >= len(v):
        return v
    idx = np.argpartition(np.abs(v), len(v) - k)[len(v) - k:]
    out = np.zeros_like(v)
    out[idx] = v[idx]
    return out


class _Deflator:
    """Sequential projection deflation S_j = P_j S P_j^* with
    P_j = (I - e_j e_j^*) ... (I - e_1 e_1^*).

    P_j is kept in the compact form I - E T E^* with T lower triangular,
    which stays exact when the e_j are not mutually orthogonal.
    """

    def __init__(self, matvec, p, dtype):
        self.matvec = matvec
        self.E = np.zeros((p, 0), dtype=dtype)
        self.T = np.zeros((0, 0), dtype=dtype)

    def add(self, e):
        j = self.E.shape[1]
        T = np.zeros((j + 1, j + 1), dtype=self.T.dtype)
        T[:j, :j] = self.T
        T[j, :j] = -(e.conj() @ self.E) @ self.T
        T[j, j] = 1.0
        self.E = np.column_stack([self.E, e])
        self.T = T

    def project(self, v):
        """P_j v."""
        return v - self.E @ (self.T @ (self.E.conj().T @ v))

    def project_adjoint(self, v):
        return v - self.E @ (self.T.conj().T @ (self.E.conj().T @ v))

    def __call__(self, v):
        if self.E.shape[1] == 0:
            return self.matvec(v)
        return self.project(self.matvec(self.project_adjoint(v)))


def truncated_power(matvec, v0, k: int, max_iters: int = SPCA_MAX_ITERS,
                    tol: float = SPCA_TOL, trace: Optional[list] = None):
    """Truncated power iteration for max v^* S v subject to nnz(v) <= k, |v| = 1."""
    v = _keep_top_rows(np.asarray(v0), k)
    nv = np.linalg.norm(v)
    if nv == 0:
        v = np.zeros_like(v)
        v[0] = 1.0
    else:
        v = v / nv
    sv = matvec(v)
    rq = float(np.vdot(v, sv).real)
    if trace is not None:
        trace.append(rq)
    for _ in range(max_iters):
        w = _keep_top_rows(sv, k)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v_new = w / nw
        sv_new = matvec(v_new)
        rq_new = float(np.vdot(v_new, sv_new).real)
        if trace is not None:
            trace.append(rq_new)
        done = abs(rq_new - rq) <= tol * max(abs(rq_new), 1e-300)
        v, sv, rq = v_new, sv_new, rq_new
        if done:
            break
    return v, rq


def _sparse_eigs(matvec, p, m, k, inits, max_iters, tol):
    if k < 1:
        raise ValueError(f"sparsity level k must be >= 1, got {k}")
    k = min(k, p)
    op = _Deflator(matvec, p, np.result_type(inits, float))
    found = []
    vals = []
    for j in range(m):
        # start from the dense eigenvector with earlier components removed
        v0 = op.project(inits[:, j])
        v, rq = truncated_power(op, v0, k, max_iters, tol)
        v = canonical_phase(v)
        op.add(v)
        found.append(v)
        vals.append(rq)
    vecs = np.stack(found, axis=1) if found else np.zeros((p, 0))
    return vecs, np.array(vals)


def sparse_top_eigs(cov, m: int, k: int, max_iters: int = SPCA_MAX_ITERS,
                    tol: float = SPCA_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Sparse leading eigenvectors with at most k nonzero rows each.

    Each component runs truncated power iteration on the projection-deflated
    matrix, started from the corresponding dense eigenvector with the earlier
    components projected out.
    """
    cov = np.asarray(cov)
    p = cov.shape[0]
    if k < 1:
        raise ValueError(f"sparsity level k must be >= 1, got {k}")
    if not 0 <= m <= p:
        raise ValueError(f"m must lie in [0, {p}], got {m}")
    inits, _ = top_eigs(cov, m)
    return _sparse_eigs(lambda v: cov @ v, p, m, k, inits, max_iters, tol)


# -- fitting from data ----------------------------------------------------------


def fit_eigenmodel(T, m: int, method: str = "pca", k: Optional[int] = None,
                   sigma_tilde: Optional[float] = None) -> EigenModel:
    """Build an :class:`EigenModel` from a training matrix.

    For n < p the dense eigenvectors come from a thin SVD of the centred data,
    which has the same nonzero spectrum as the sample covariance.
    """
    Y = _matrix(T)
    n, p = Y.shape
    if n < 2:
        raise ValueError("need at least two training observations")
    if not 1 <= m <= p:
        raise ValueError(f"m must lie in [1, {p}], got {m}")
    if sigma_tilde is None:
        sigma_tilde = T.noise_sigma_tilde if isinstance(T, TrainingSet) else 0.0
    mean = Y.mean(axis=0)
    X = (Y - mean).conj() / np.sqrt(n)  # covariance = X^* X
    total = float(np.vdot(X, X).real)
    if n < p:
        _, sv, vh = np.linalg.svd(X, full_matrices=False)
        vals_all = sv ** 2
        vecs_all = canonical_phase(vh.conj().T)
        if m > len(vals_all):
            extra, _ = top_eigs(X.conj().T @ X, m)
            vecs_all = extra
            vals_all = np.concatenate([vals_all, np.zeros(m - len(vals_all))])
        order = _order(vals_all[:m], vecs_all[:, :m])
        dense_vecs, dense_vals = vecs_all[:, :m][:, order], vals_all[:m][order]
    else:
        dense_vecs, dense_vals = top_eigs(X.conj().T @ X, m)

    if method == "pca":
        vecs, vals, kk = dense_vecs, dense_vals, None
    elif method == "spca":
        if k is None:
            raise ValueError("sparse PCA needs a sparsity level k")

        def matvec(v):
            return X.conj().T @ (X @ v)

        vecs, vals = _sparse_eigs(matvec, p, m, k, dense_vecs, SPCA_MAX_ITERS, SPCA_TOL)
        kk = k
    else:
        raise ValueError(f"unknown PCA method {method!r}")
    return EigenModel(mean=mean, eigvecs=vecs, eigvals=np.maximum(vals, 0.0),
                      total_variance=total, n=n, sigma_tilde=float(sigma_tilde),
                      sparse_k=kk)


# -- persistence ----------------------------------------------------------------


def save_eigenmodel(path, model: EigenModel) -> None:
    """Matrix file with the mean as column 0 and eigenvectors after it,
    plus a ``path + '.meta'`` key=value sidecar."""
    from .formats import write_keyvalue, write_matrix

    write_matrix(path, np.column_stack([model.mean, model.eigvecs]))
    write_keyvalue(path + ".meta", {
        "n": model.n,
        "p": model.p,
        "m": model.m,
        "sigma_tilde": repr(float(model.sigma_tilde)),
        "total_variance": repr(float(model.total_variance)),
        "sparse_k": "" if model.sparse_k is None else model.sparse_k,
        "eigenvalues": ",".join(repr(float(v)) for v in model.eigvals),
    })


def load_eigenmodel(path) -> EigenModel:
    from .formats import read_keyvalue, read_matrix

    mat = read_matrix(path)
    meta = read_keyvalue(path + ".meta")
    p, m = int(meta["p"]), int(meta["m"])
    if mat.shape != (p, m + 1):
        raise ValueError(f"{path}: matrix shape {mat.shape} does not match p={p}, m={m}")
    vals = np.array([float(v) for v in meta["eigenvalues"].split(",") if v])
    if len(vals) != m:
        raise ValueError(f"{path}.meta: {len(vals)} eigenvalues for m={m}")
    mean, vecs = mat[:, 0], mat[:, 1:]
    if not np.any(mat.imag):
        mean, vecs = mean.real.copy(), vecs.real.copy()
    k = meta.get("sparse_k", "")
    return EigenModel(mean=mean, eigvecs=vecs, eigvals=vals,
                      total_variance=float(meta["total_variance"]), n=int(meta["n"]),
                      sigma_tilde=float(meta["sigma_tilde"]),
                      sparse_k=int(k) if k else None)
