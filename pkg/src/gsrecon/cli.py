"""Command-line entry point: ``gsrecon {run,reconstruct,train,diag}``.

Exit codes: 0 success, 1 numerical failure (an ill-posed system), 2 usage,
configuration or file errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import experiments, formats, fpca, gs, gsfpca
from .bases import BasisSpec, assemble_cross_gram, build_basis
from .grid import make_grid

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _add_basis_args(ap):
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--resolution", type=int, required=True,
                    help="total number of grid nodes")
    ap.add_argument("--s", type=int, default=4, help="wavelet vanishing moments")
    ap.add_argument("--sampling", choices=experiments.SAMPLINGS, default="fourier")
    ap.add_argument("--q", type=int, required=True, help="number of measurements")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsrecon",
                                 description="Generalized sampling with PCA-based reconstruction spaces.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo scenario")
    run.add_argument("--config", help="key=value configuration file")
    run.add_argument("--scenario", choices=experiments.SCENARIOS)
    run.add_argument("--sweep", choices=experiments.SWEEPS)
    run.add_argument("--set", dest="overrides", type=_kv, action="append", default=[],
                     metavar="KEY=VALUE", help="override a configuration key (repeatable)")
    run.add_argument("--seed", type=int)
    run.add_argument("--repetitions", type=int)
    run.add_argument("--output-dir")
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: all cores)")

    rec = sub.add_parser("reconstruct", help="reconstruct from one measurement file")
    rec.add_argument("--measurements", required=True, help="q x 1 matrix file")
    rec.add_argument("--eigenmodel", help="eigenmodel file; plain GS when omitted")
    rec.add_argument("--p", type=int, help="wavelet count (taken from the eigenmodel if given)")
    _add_basis_args(rec)
    rec.add_argument("--method", choices=("least_squares", "ridge", "lasso"),
                     default="least_squares")
    rec.add_argument("--lam", type=float, default=0.0)
    rec.add_argument("--m", type=int, help="use only the leading m components")
    rec.add_argument("--tau", type=float, help="truncation level")
    rec.add_argument("--truth", help="ground-truth field file; prints the relative error")
    rec.add_argument("--output-dir", required=True)

    tr = sub.add_parser("train", help="fit an eigenmodel from a training matrix")
    tr.add_argument("--training", required=True, help="n x p matrix file")
    tr.add_argument("--m", type=int, required=True)
    tr.add_argument("--method", choices=("pca", "spca"), default="pca")
    tr.add_argument("--k", type=int, help="sparse PCA row budget (default p/4)")
    tr.add_argument("--sigma-tilde", type=float, default=0.0)
    tr.add_argument("--out", required=True)

    dg = sub.add_parser("diag", help="explained variance and sigma_min against m")
    dg.add_argument("--eigenmodel", required=True)
    _add_basis_args(dg)
    dg.add_argument("--m-values", default="", help="e.g. 10:500:10 or 10,20,40")
    dg.add_argument("--lam", type=float, default=0.0015)
    dg.add_argument("--out", required=True, help="diagnostics CSV")
    return ap


# -- commands --------------------------------------------------------------------------


def cmd_run(args) -> int:
    settings = formats.read_keyvalue(args.config) if args.config else {}
    settings.update(dict(args.overrides))
    for key in ("scenario", "sweep", "seed", "repetitions"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = str(value)
    if args.output_dir:
        settings["output_dir"] = args.output_dir
    try:
        cfg = experiments.make_config(settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    result = experiments.run_experiment(cfg, threads=args.threads)
    paths = experiments.write_outputs(result)
    if result.diagnostics:
        for row in result.diagnostics:
            print(" ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    else:
        for row in result.summary_rows():
            print(" ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    print(f"wrote {len(paths)} files to {cfg.output_dir}")
    return EXIT_OK


def _require(path, what):
    if not path or not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")


def _load_model(path):
    _require(path, "eigenmodel file")
    _require(path + ".meta", "eigenmodel metadata")
    return fpca.load_eigenmodel(path)


def _setup(args, p):
    try:
        grid = make_grid(args.dim, args.resolution)
        rec = build_basis(BasisSpec("wavelet", p, dim=args.dim, s=args.s), grid)
        samp = build_basis(BasisSpec(args.sampling, args.q, dim=args.dim), grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return grid, rec, samp, assemble_cross_gram(rec, samp)


def cmd_reconstruct(args) -> int:
    _require(args.measurements, "measurement file")
    b = formats.read_matrix(args.measurements).ravel()
    model = _load_model(args.eigenmodel) if args.eigenmodel else None
    p = model.p if model is not None else args.p
    if p is None:
        raise UsageError("--p is required without an eigenmodel")
    if args.p is not None and args.p != p:
        raise UsageError(f"--p={args.p} disagrees with the eigenmodel (p={p})")
    if len(b) != args.q:
        raise UsageError(f"{args.measurements}: {len(b)} measurements, expected q={args.q}")
    grid, rec, samp, A = _setup(args, p)
    try:
        cfg = gs.SolverConfig(args.method, lam=args.lam, truncation_tau=args.tau,
                              allow_rank_deficient=model is None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if model is not None:
        if args.m is not None:
            model = model.truncated(args.m)
        if args.method == "lasso":
            raise UsageError("lasso is only available for plain GS")
        result = gsfpca.reconstruct(A, model, b, cfg, rec)
    else:
        result = gsfpca.reconstruct_gs(A, b, cfg, rec)

    out = formats.ensure_dir(args.output_dir)
    formats.write_coefficients(os.path.join(out, "coefficients.csv"), result.coeffs_p)
    formats.write_field(os.path.join(out, "field.bin"), result.field)
    image = np.asarray(result.field.values).real
    formats.write_pfm(os.path.join(out, "field.pfm"), image)
    if args.dim == 2:
        formats.write_pgm(os.path.join(out, "field.pgm"), image)
    diag = {k: (repr(float(v)) if not isinstance(v, bool) else v)
            for k, v in result.diagnostics.items()}
    if args.truth:
        _require(args.truth, "ground-truth field")
        truth = formats.read_field(args.truth)
        if truth.grid != grid:
            raise UsageError(f"{args.truth}: grid {truth.grid} does not match {grid}")
        err = gsfpca.relative_error(result.field, truth)
        diag["relative_error"] = repr(err)
        print(f"relative_error={err!r}")
    formats.write_keyvalue(os.path.join(out, "diagnostics.txt"), diag)
    for key, value in diag.items():
        if key != "relative_error":
            print(f"{key}={value}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require(args.training, "training matrix")
    Y = formats.read_matrix(args.training)
    if not np.any(Y.imag):
        Y = Y.real
    try:
        T = fpca.TrainingSet(Y, None, args.sigma_tilde)
        k = args.k if args.k is not None else max(1, T.p // 4)
        model = fpca.fit_eigenmodel(T, args.m, args.method, k=k if args.method == "spca" else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    fpca.save_eigenmodel(args.out, model)
    print(f"n={model.n} p={model.p} m={model.m} "
          f"explained_variance={fpca.explained_variance(model):.6f}")
    return EXIT_OK


def cmd_diag(args) -> int:
    model = _load_model(args.eigenmodel)
    try:
        m_values = (experiments._parse_int_list(args.m_values) if args.m_values
                    else list(range(1, model.m + 1)))
    except ValueError as exc:
        raise UsageError(f"bad --m-values: {exc}") from exc
    if any(not 1 <= m <= model.m for m in m_values):
        raise UsageError(f"--m-values must lie in [1, {model.m}]")
    _, _, _, A = _setup(args, model.p)
    key = "spca" if model.sparse_k is not None else "pca"
    rows = experiments.diagnostics_table(A, {key: model}, m_values, args.lam)
    formats.write_csv(args.out, experiments.DIAG_HEADER, rows)
    for row in rows:
        print(" ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "reconstruct": cmd_reconstruct, "train": cmd_train,
            "diag": cmd_diag}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except gs.IllPosedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
