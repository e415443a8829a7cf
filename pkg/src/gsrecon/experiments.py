"""Configuration-driven Monte Carlo experiments.

Each scenario expands into a list of sweep points.  Every (point, repetition)
pair draws its training set, test function and measurement noise from three
independent random streams keyed by ``(seed, repetition, purpose)``, so two
points of a sweep see the same test function and the same noise pattern and
results do not depend on scheduling.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import formats, fpca, gs, gsfpca, simulate
from .bases import BasisSpec, assemble_cross_gram, build_basis
from .grid import FieldSample, make_grid

log = logging.getLogger(__name__)

SCENARIOS = ("fig3", "fig4_sweep", "fig5_noiseless", "phantom_diag", "phantom_recon", "custom")
SWEEPS = ("q", "n", "p", "sigma")
METHODS = ("gs", "gs_l1", "gs_l2", "gsfpca_ls", "gsfpca_ridge", "gsfpca_sparse",
           "gsfpca_sparse_ridge")
SAMPLINGS = ("fourier", "pixel")
REFERENCES = ("truth", "projection")

# stream purposes
TRAIN, TEST, NOISE = 0, 1, 2

SIGMA_1D = 0.02 * math.sqrt(2.0)
SIGMA_2D = 0.0002 * math.sqrt(2.0)

_METHODS_1D = ("gs", "gs_l1", "gs_l2", "gsfpca_ls", "gsfpca_ridge", "gsfpca_sparse")
_METHODS_2D = ("gs", "gs_l2", "gsfpca_ls", "gsfpca_ridge", "gsfpca_sparse",
               "gsfpca_sparse_ridge")

DEFAULT_SWEEP_VALUES = {
    "q": (4, 6, 8, 10, 12, 16, 24, 32, 48, 64),
    "n": (32, 64, 128, 256, 512, 1024),
    "p": (64, 128, 256, 512),
    "sigma": tuple(SIGMA_1D * f for f in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "fig3"
    sweep: str = ""
    values: tuple = ()
    dim: int = 1
    p: int = 128
    q: int = 12
    n: int = 128
    m: int = 10
    s: int = 4
    orders: tuple = (4,)
    sigma: float = SIGMA_1D
    sigma_tilde: float = 0.01
    lam_gs: float = 0.04
    lam_ridge: float = 0.08
    lam_diag: float = 0.0015
    tau: Optional[float] = None
    k: Optional[int] = None
    repetitions: int = 10
    seed: int = 0
    methods: tuple = _METHODS_1D
    sampling: str = "fourier"
    resolution: Optional[int] = None
    perturbation: float = 0.05
    m_values: tuple = ()
    reference: str = ""
    shared_training: Optional[bool] = None
    output_dir: str = "results"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.scenario == "fig4_sweep" and self.sweep not in SWEEPS:
            raise ValueError(f"fig4_sweep needs sweep in {SWEEPS}, got {self.sweep!r}")
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.q < 1 or self.repetitions < 1 or self.n < 2:
            raise ValueError("need q >= 1, n >= 2 and repetitions >= 1")
        if not 1 <= self.m <= self.p:
            raise ValueError(f"need 1 <= m <= p, got m={self.m}, p={self.p}")
        if any(not 1 <= mv <= self.p for mv in self.m_values):
            raise ValueError("every entry of m_values must lie in [1, p]")
        if self.sampling not in SAMPLINGS:
            raise ValueError(f"sampling must be one of {SAMPLINGS}, got {self.sampling!r}")
        if self.reference and self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}, got {self.reference!r}")
        if min(self.sigma, self.sigma_tilde, self.lam_gs, self.lam_ridge, self.lam_diag) < 0:
            raise ValueError("noise levels and regularization weights must be nonnegative")

    @property
    def sparse_k(self) -> int:
        return self.k if self.k is not None else max(1, self.p // 4)

    @property
    def error_reference(self) -> str:
        return self.reference or ("truth" if self.dim == 1 else "projection")

    @property
    def train_once(self) -> bool:
        return self.dim == 2 if self.shared_training is None else self.shared_training


def scenario_defaults(scenario: str) -> dict:
    """Parameter defaults for a scenario; explicit settings override them."""
    if scenario in ("fig3", "custom"):
        return {}
    if scenario == "fig4_sweep":
        return {"p": 512, "n": 1024}
    if scenario == "fig5_noiseless":
        return {"sigma": 0.0, "sigma_tilde": 0.0, "orders": (1, 2, 4),
                "values": DEFAULT_SWEEP_VALUES["p"], "methods": ("gs", "gsfpca_ls")}
    common_2d = {"dim": 2, "p": 4096, "q": 1024, "n": 512, "s": 4, "orders": (4,),
                 "sigma": SIGMA_2D, "sigma_tilde": 0.0001, "k": 512, "resolution": 256 ** 2}
    if scenario == "phantom_diag":
        return {**common_2d, "repetitions": 1, "m": 500, "methods": (),
                "m_values": tuple(range(10, 501, 10))}
    if scenario == "phantom_recon":
        # ridge weight equal to the measurement noise variance: the Gaussian
        # posterior mean under the fitted covariance
        return {**common_2d, "m": 230, "lam_gs": 1e-4, "lam_ridge": SIGMA_2D ** 2,
                "methods": _METHODS_2D}
    raise ValueError(f"unknown scenario {scenario!r}")


def _coerce(name: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise ValueError(f"unknown configuration key {name!r}")
    if name in ("methods",):
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    if name in ("orders", "m_values"):
        return tuple(_parse_int_list(raw))
    if name == "values":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if name in ("tau", "k", "resolution"):
        if raw.lower() in ("", "none"):
            return None
        return float(raw) if name == "tau" else int(raw)
    if name == "shared_training":
        if raw.lower() in ("", "auto", "none"):
            return None
        return raw.lower() in ("1", "true", "yes")
    if name in ("dim", "p", "q", "n", "m", "s", "repetitions", "seed"):
        return int(raw)
    if name in ("sigma", "sigma_tilde", "lam_gs", "lam_ridge", "lam_diag", "perturbation"):
        return float(raw)
    return raw


def _parse_int_list(raw: str) -> list[int]:
    """``"10,20,30"`` or ``"10:500:10"`` (inclusive stop)."""
    if ":" in raw:
        parts = [int(v) for v in raw.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(start, stop + 1, step))
    return [int(v) for v in raw.split(",") if v.strip()]


def make_config(settings: Optional[dict] = None, **overrides) -> ExperimentConfig:
    """Build a config from scenario defaults, then ``settings``, then overrides."""
    merged = dict(settings or {})
    merged.update(overrides)
    merged = {k: _coerce(k, v) for k, v in merged.items() if v is not None}
    scenario = merged.get("scenario", "fig3")
    base = scenario_defaults(scenario)
    base.update(merged)
    return ExperimentConfig(**base)


def load_config(path, **overrides) -> ExperimentConfig:
    return make_config(formats.read_keyvalue(path), **overrides)


def config_items(cfg: ExperimentConfig) -> dict:
    out = {}
    for key, value in asdict(cfg).items():
        if isinstance(value, tuple):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        elif value is None:
            value = "none"
        out[key] = value
    return out


# -- sweep points ------------------------------------------------------------------


def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    """Parameter overrides for every point of the scenario's sweep."""
    if cfg.scenario == "fig4_sweep":
        vals = cfg.values or DEFAULT_SWEEP_VALUES[cfg.sweep]
        if cfg.sweep == "sigma":
            return [{"sigma": float(v)} for v in vals]
        if cfg.sweep == "p":
            return [{"p": int(v), "n": 2 * int(v)} for v in vals]
        return [{cfg.sweep: int(v)} for v in vals]
    if cfg.scenario == "fig5_noiseless":
        vals = cfg.values or DEFAULT_SWEEP_VALUES["p"]
        return [{"s": int(s), "p": int(v), "n": 2 * int(v)} for s in cfg.orders for v in vals]
    return [{}]


def _point_columns(points: list[dict]) -> list[str]:
    cols = []
    for pt in points:
        cols.extend(k for k in pt if k not in cols)
    return cols


def _grid_resolution(cfg: ExperimentConfig, points: list[dict]) -> int:
    if cfg.resolution is not None:
        return cfg.resolution
    if cfg.dim == 2:
        return 256 ** 2
    largest = max(max(pt.get("p", cfg.p), pt.get("q", cfg.q)) for pt in points)
    return 16 * 2 ** math.ceil(math.log2(largest))


# -- per-point context ---------------------------------------------------------------


@dataclass
class _Context:
    cfg: ExperimentConfig
    grid: object
    rec: object
    samp: object
    A: np.ndarray
    generator: object
    models: dict = field(default_factory=dict)


def _needs(cfg):
    dense = any(m in cfg.methods for m in ("gsfpca_ls", "gsfpca_ridge"))
    sparse = any(m in cfg.methods for m in ("gsfpca_sparse", "gsfpca_sparse_ridge"))
    return dense, sparse


def _build_context(cfg: ExperimentConfig, grid, generator, cache: dict) -> _Context:
    key = (cfg.p, cfg.s, cfg.q, cfg.sampling)
    if key not in cache:
        rec = build_basis(BasisSpec("wavelet", cfg.p, dim=cfg.dim, s=cfg.s), grid)
        samp = build_basis(BasisSpec(cfg.sampling, cfg.q, dim=cfg.dim), grid)
        cache[key] = (rec, samp, assemble_cross_gram(rec, samp))
    rec, samp, A = cache[key]
    return _Context(cfg, grid, rec, samp, A, generator)


def _fit_models(ctx: _Context, rep_key: int, m: Optional[int] = None) -> dict:
    cfg = ctx.cfg
    m = cfg.m if m is None else m
    T = simulate.make_training_set(ctx.generator, cfg.n, ctx.rec, cfg.sigma_tilde,
                                   simulate.rng_stream(cfg.seed, rep_key, TRAIN))
    dense, sparse = _needs(cfg)
    if cfg.scenario == "phantom_diag":
        dense = sparse = True
    models = {}
    if dense:
        models["pca"] = fpca.fit_eigenmodel(T, m)
    if sparse:
        models["spca"] = fpca.fit_eigenmodel(T, m, "spca", k=cfg.sparse_k)
    return models


def _solve(method: str, ctx: _Context, models: dict, b):
    cfg = ctx.cfg
    tau = cfg.tau
    if method == "gs":
        scfg = gs.SolverConfig(truncation_tau=tau, allow_rank_deficient=True)
        return gsfpca.reconstruct_gs(ctx.A, b, scfg, ctx.rec)
    if method == "gs_l2":
        return gsfpca.reconstruct_gs(ctx.A, b, gs.SolverConfig("ridge", lam=cfg.lam_gs,
                                                               truncation_tau=tau), ctx.rec)
    if method == "gs_l1":
        return gsfpca.reconstruct_gs(ctx.A, b, gs.SolverConfig("lasso", lam=cfg.lam_gs,
                                                               truncation_tau=tau), ctx.rec)
    model = models["spca" if "sparse" in method else "pca"]
    if method.endswith("ridge"):
        scfg = gs.SolverConfig("ridge", lam=cfg.lam_ridge, truncation_tau=tau)
    else:
        scfg = gs.SolverConfig(truncation_tau=tau)
    return gsfpca.reconstruct(ctx.A, model, b, scfg, ctx.rec)


@dataclass
class RepetitionResult:
    point: int
    repetition: int
    noise_ratio: float
    rows: dict            # method -> (relative_error, error_vs_truth, status, sigma_min, residual)
    fields: dict          # name -> FieldSample, only kept for repetition 0 in 2D


def _run_repetition(ctx: _Context, point: int, rep: int, models: Optional[dict]) -> RepetitionResult:
    cfg = ctx.cfg
    if models is None:
        models = _fit_models(ctx, rep)
    f = ctx.generator(simulate.rng_stream(cfg.seed, rep, TEST))
    clean = ctx.samp.analyze(f.values)
    b = simulate.measure(f, ctx.samp, cfg.sigma, simulate.rng_stream(cfg.seed, rep, NOISE))
    denom = np.linalg.norm(clean)
    noise_ratio = float(np.linalg.norm(b.values - clean) / denom) if denom > 0 else float("nan")
    proj = FieldSample(ctx.grid, ctx.rec.synthesize(ctx.rec.analyze(f.values)))
    target = f if cfg.error_reference == "truth" else proj
    keep = cfg.dim == 2 and rep == 0
    out = {"truth": f, "projection": proj} if keep else {}
    rows = {}
    for method in cfg.methods:
        try:
            res = _solve(method, ctx, models, b)
        except gs.IllPosedError as exc:
            rows[method] = (float("nan"), float("nan"), "ill_posed", exc.sigma_min, float("nan"))
            continue
        d = res.diagnostics
        smin = d.get("sigma_min_reduced", d.get("sigma_min"))
        status = "ill_posed" if d.get("ill_posed") else "ok"
        rows[method] = (gsfpca.relative_error(res.field, target),
                        gsfpca.relative_error(res.field, f), status, float(smin),
                        d["residual_norm"])
        if keep:
            out[method] = res.field
    return RepetitionResult(point, rep, noise_ratio, rows, out)


# -- diagnostics ---------------------------------------------------------------------


def diagnostics_table(A, models: dict, m_values, lam: float) -> list[tuple]:
    """Rows ``(m, ev_pca, ev_spca, smin_pca, smin_spca, smin_reg_pca, smin_reg_spca)``."""
    rows = []
    for m in m_values:
        row = [m]
        for key in ("pca", "spca"):
            M = models.get(key)
            row.append(fpca.explained_variance(M, m) if M is not None else float("nan"))
        for key in ("pca", "spca"):
            M = models.get(key)
            row.append(gs.sigma_min(A @ M.eigvecs[:, :m]) if M is not None else float("nan"))
        for key in ("pca", "spca"):
            M = models.get(key)
            if M is None:
                row.append(float("nan"))
                continue
            Ahat = A @ M.eigvecs[:, :m]
            row.append(gsfpca.regularized_sigma_min(Ahat, lam, np.maximum(M.eigvals[:m], 1e-300)))
        rows.append(tuple(row))
    return rows


DIAG_HEADER = ["m", "explained_variance_pca", "explained_variance_spca", "sigma_min_pca",
               "sigma_min_spca", "sigma_min_reg_pca", "sigma_min_reg_spca"]


# -- driver --------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: list
    repetitions: list
    diagnostics: list = field(default_factory=list)

    def errors(self, method: str, point: int = 0, column: int = 0) -> np.ndarray:
        """Per-repetition values for one method at one point (NaN when ill-posed)."""
        return np.array([r.rows[method][column] for r in self.repetitions
                         if r.point == point and method in r.rows])

    def median(self, method: str, point: int = 0, column: int = 0) -> float:
        """Median over repetitions that produced an estimate; column 1 is the
        error against the raw ground truth."""
        e = self.errors(method, point, column)
        e = e[~np.isnan(e)]
        return float(np.median(e)) if len(e) else float("nan")

    def noise_ratios(self, point: int = 0) -> np.ndarray:
        return np.array([r.noise_ratio for r in self.repetitions if r.point == point])

    def summary_rows(self):
        cols = _point_columns(self.points)
        for i, pt in enumerate(self.points):
            for method in self.config.methods:
                e = self.errors(method, i)
                status = [r.rows[method][2] for r in self.repetitions
                          if r.point == i and method in r.rows]
                ok = e[~np.isnan(e)]
                if len(ok):
                    q25, med, q75 = (float(v) for v in np.percentile(ok, [25, 50, 75]))
                else:
                    q25 = med = q75 = float("nan")
                yield ([pt.get(c, "") for c in cols]
                       + [method, med, q25, q75, q75 - q25, len(ok),
                          sum(s == "ill_posed" for s in status)])


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Run every repetition of every sweep point (no files written)."""
    points = sweep_points(cfg)
    grid = make_grid(cfg.dim, _grid_resolution(cfg, points))
    if cfg.dim == 1:
        generator = simulate.gaussian_model_1d(grid)
    else:
        generator = simulate.PhantomGenerator(grid, scale=cfg.perturbation)
    cache: dict = {}
    threads = threads or os.cpu_count() or 1

    if cfg.scenario == "phantom_diag":
        m_values = cfg.m_values or (cfg.m,)
        ctx = _build_context(cfg, grid, generator, cache)
        models = _fit_models(ctx, 0, m=max(m_values))
        return ExperimentResult(cfg, points, [],
                                diagnostics_table(ctx.A, models, m_values, cfg.lam_diag))

    tasks = []
    for i, pt in enumerate(points):
        pcfg = replace(cfg, **pt)
        ctx = _build_context(pcfg, grid, generator, cache)
        shared = _fit_models(ctx, 0) if cfg.train_once else None
        tasks.extend((ctx, i, rep, shared) for rep in range(cfg.repetitions))
        log.info("point %d/%d prepared: %s", i + 1, len(points), pt)

    def work(task):
        return _run_repetition(*task)

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reps = list(pool.map(work, tasks))
    else:
        reps = [work(t) for t in tasks]
    return ExperimentResult(cfg, points, reps)


def write_outputs(result: ExperimentResult, output_dir: Optional[str] = None) -> list[str]:
    """Write CSVs (and images in 2D) for a finished run; returns the paths."""
    cfg = result.config
    out = formats.ensure_dir(output_dir or cfg.output_dir)
    written = []

    def path(name):
        p = os.path.join(out, name)
        written.append(p)
        return p

    formats.write_keyvalue(path("config.txt"), config_items(cfg))
    if cfg.scenario == "phantom_diag":
        formats.write_csv(path("diagnostics.csv"), DIAG_HEADER, result.diagnostics)
        return written

    cols = _point_columns(result.points)
    header = cols + ["repetition", "relative_error", "error_vs_truth", "status",
                     "sigma_min", "residual_norm", "noise_ratio"]
    for method in cfg.methods:
        rows = []
        for r in result.repetitions:
            pt = result.points[r.point]
            rows.append([pt.get(c, "") for c in cols] + [r.repetition, *r.rows[method],
                                                         r.noise_ratio])
        formats.write_csv(path(f"errors_{method}.csv"), header, rows)
    formats.write_csv(path("summary.csv"),
                      cols + ["method", "median", "q25", "q75", "iqr", "n_ok", "n_ill_posed"],
                      result.summary_rows())
    if cfg.dim == 2:
        img_dir = formats.ensure_dir(os.path.join(out, "images"))
        for r in result.repetitions:
            for name, fs in r.fields.items():
                stem = os.path.join(img_dir, f"{name}_point{r.point}_rep{r.repetition}")
                img = np.asarray(fs.values).real
                formats.write_pgm(stem + ".pgm", img)
                formats.write_pfm(stem + ".pfm", img)
                written += [stem + ".pgm", stem + ".pfm"]
    return written
