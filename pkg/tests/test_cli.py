import os
import subprocess
import sys

import numpy as np
import pytest

from gsrecon import cli, fpca, formats, gs, gsfpca, simulate
from gsrecon import experiments as ex
from gsrecon.bases import BasisSpec, assemble_cross_gram, build_basis
from gsrecon.grid import FieldSample, make_grid


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def problem1d(tmp_path_factory):
    """A trained eigenmodel plus one noisy measurement file on the 1D model."""
    d = tmp_path_factory.mktemp("cli1d")
    grid = make_grid(1, 2048)
    rec = build_basis(BasisSpec("wavelet", 128, s=4), grid)
    samp = build_basis(BasisSpec("fourier", 12), grid)
    gen = simulate.gaussian_model_1d(grid)
    T = simulate.make_training_set(gen, 128, rec, 0.01, simulate.rng_stream(1, 0))
    formats.write_matrix(str(d / "train.bin"), T.Y)
    f = gen(simulate.rng_stream(1, 1))
    b = simulate.measure(f, samp, ex.SIGMA_1D, simulate.rng_stream(1, 2)).values
    formats.write_matrix(str(d / "b.bin"), b[:, None])
    formats.write_field(str(d / "truth.bin"), f)
    return dict(dir=d, grid=grid, rec=rec, samp=samp, T=T, f=f, b=b)


def basis_args(res=2048, q=12):
    return ["--resolution", res, "--q", q, "--s", 4]


def test_train_then_reconstruct_matches_library(problem1d, capsys):
    d = problem1d["dir"]
    assert run_cli("train", "--training", d / "train.bin", "--m", 10,
                   "--sigma-tilde", 0.01, "--out", d / "model.bin") == 0
    assert run_cli("reconstruct", "--measurements", d / "b.bin", "--eigenmodel",
                   d / "model.bin", *basis_args(), "--truth", d / "truth.bin",
                   "--output-dir", d / "out") == 0
    printed = capsys.readouterr().out
    line = next(l for l in printed.splitlines() if l.startswith("relative_error="))
    cli_err = float(line.split("=", 1)[1])

    model = fpca.fit_eigenmodel(problem1d["T"], 10)
    A = assemble_cross_gram(problem1d["rec"], problem1d["samp"])
    lib = gsfpca.reconstruct(A, model, problem1d["b"], gs.SolverConfig(), problem1d["rec"])
    lib_err = gsfpca.relative_error(lib.field, problem1d["f"])
    assert abs(cli_err - lib_err) < 1e-12
    assert lib_err < 0.1

    out = d / "out"
    assert {"coefficients.csv", "field.bin", "field.pfm", "diagnostics.txt"} <= set(os.listdir(out))
    coeffs = formats.read_csv(str(out / "coefficients.csv"))
    got = np.array([float(r["re"]) + 1j * float(r["im"]) for r in coeffs])
    np.testing.assert_allclose(got, lib.coeffs_p, atol=1e-12)
    diag = formats.read_keyvalue(str(out / "diagnostics.txt"))
    assert float(diag["relative_error"]) == cli_err and "sigma_min_reduced" in diag


def test_reconstruct_plain_gs_and_ridge(problem1d, capsys):
    d = problem1d["dir"]
    assert run_cli("reconstruct", "--measurements", d / "b.bin", "--p", 128, *basis_args(),
                   "--method", "lasso", "--lam", 0.04, "--output-dir", d / "gs") == 0
    assert "ill_posed=True" in capsys.readouterr().out
    run_cli("train", "--training", d / "train.bin", "--m", 10, "--out", d / "m2.bin")
    assert run_cli("reconstruct", "--measurements", d / "b.bin", "--eigenmodel", d / "m2.bin",
                   *basis_args(), "--method", "ridge", "--lam", 0.08, "--m", 5,
                   "--output-dir", d / "ridge") == 0


def test_sparse_training_and_diag(problem1d, capsys):
    d = problem1d["dir"]
    assert run_cli("train", "--training", d / "train.bin", "--m", 12, "--method", "spca",
                   "--out", d / "sp.bin") == 0
    model = fpca.load_eigenmodel(str(d / "sp.bin"))
    assert model.sparse_k == 32 and np.all(np.count_nonzero(model.eigvecs, axis=0) <= 32)
    assert run_cli("diag", "--eigenmodel", d / "sp.bin", *basis_args(), "--m-values", "2:12:2",
                   "--out", d / "diag.csv") == 0
    rows = formats.read_csv(str(d / "diag.csv"))
    assert [int(r["m"]) for r in rows] == [2, 4, 6, 8, 10, 12]
    assert rows[0]["explained_variance_pca"] == "nan"


def test_ill_posed_reconstruction_exits_1(problem1d, capsys):
    d = problem1d["dir"]
    run_cli("train", "--training", d / "train.bin", "--m", 20, "--out", d / "m20.bin")
    code = run_cli("reconstruct", "--measurements", d / "b.bin", "--eigenmodel", d / "m20.bin",
                   *basis_args(), "--output-dir", d / "bad")
    assert code == 1
    assert "sigma_min" in capsys.readouterr().err


def test_missing_eigenmodel_exits_2_with_path(problem1d, capsys, tmp_path):
    missing = tmp_path / "nope.bin"
    code = run_cli("reconstruct", "--measurements", problem1d["dir"] / "b.bin",
                   "--eigenmodel", missing, *basis_args(), "--output-dir", tmp_path / "o")
    assert code == 2
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize("extra,match", [
    (["--q", 13], "expected q=13"),
    (["--p", 64], "disagrees"),
    (["--method", "lasso"], "lasso"),
])
def test_reconstruct_usage_errors(problem1d, capsys, extra, match):
    d = problem1d["dir"]
    run_cli("train", "--training", d / "train.bin", "--m", 10, "--out", d / "m3.bin")
    argv = ["reconstruct", "--measurements", d / "b.bin", "--eigenmodel", d / "m3.bin",
            "--resolution", 2048, "--s", 4, "--output-dir", d / "u"]
    if "--q" not in extra:
        argv += ["--q", 12]
    assert run_cli(*argv, *extra) == 2
    assert match in capsys.readouterr().err


def test_invalid_run_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("scenario = fig3\nmethods = gs,unknown\n")
    assert run_cli("run", "--config", cfg, "--output-dir", tmp_path / "o") == 2
    assert "unknown" in capsys.readouterr().err
    assert run_cli("run", "--config", tmp_path / "absent.txt") == 2


def test_run_writes_outputs(tmp_path, capsys):
    assert run_cli("run", "--scenario", "fig3", "--repetitions", 2, "--seed", 3,
                   "--set", "methods=gs,gsfpca_ls", "--output-dir", tmp_path, "--threads", 1) == 0
    assert {"config.txt", "summary.csv", "errors_gs.csv", "errors_gsfpca_ls.csv"} == \
        set(os.listdir(tmp_path))
    cfg = ex.load_config(str(tmp_path / "config.txt"))
    assert cfg.seed == 3 and cfg.methods == ("gs", "gsfpca_ls")


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gsrecon.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "reconstruct" in out.stdout


def test_2d_files_reproduce_run(tmp_path, capsys):
    """Train/reconstruct through files reproduces the first repetition of ``run``."""
    settings = {"scenario": "custom", "dim": "2", "p": "256", "q": "64", "n": "64", "m": "20",
                "resolution": "4096", "sigma": repr(ex.SIGMA_2D), "sigma_tilde": "1e-4",
                "repetitions": "1", "methods": "gsfpca_ls", "seed": "11"}
    cfg = ex.make_config(settings)
    res = ex.run_experiment(cfg, threads=1)

    grid = make_grid(2, 4096)
    rec = build_basis(BasisSpec("wavelet", 256, dim=2, s=4), grid)
    samp = build_basis(BasisSpec("fourier", 64, dim=2), grid)
    gen = simulate.PhantomGenerator(grid, cfg.perturbation)
    T = simulate.make_training_set(gen, 64, rec, 1e-4, simulate.rng_stream(11, 0, ex.TRAIN))
    f = gen(simulate.rng_stream(11, 0, ex.TEST))
    b = simulate.measure(f, samp, ex.SIGMA_2D, simulate.rng_stream(11, 0, ex.NOISE)).values
    proj = FieldSample(grid, rec.synthesize(rec.analyze(f.values)))
    formats.write_matrix(str(tmp_path / "train.bin"), T.Y)
    formats.write_matrix(str(tmp_path / "b.bin"), b[:, None])
    formats.write_field(str(tmp_path / "proj.bin"), proj)

    assert run_cli("train", "--training", tmp_path / "train.bin", "--m", 20,
                   "--out", tmp_path / "model.bin") == 0
    assert run_cli("reconstruct", "--measurements", tmp_path / "b.bin", "--eigenmodel",
                   tmp_path / "model.bin", "--dim", 2, "--resolution", 4096, "--q", 64,
                   "--truth", tmp_path / "proj.bin", "--output-dir", tmp_path / "out") == 0
    line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("relative_error"))
    assert abs(float(line.split("=")[1]) - res.errors("gsfpca_ls")[0]) < 1e-12
    assert os.path.exists(tmp_path / "out" / "field.pgm")
