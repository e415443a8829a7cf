#!/usr/bin/env python3
"""File-based workflow through the ``gsrecon`` command line.

Writes a 1D training matrix, one measurement vector and its ground truth,
then calls ``gsrecon train``, ``gsrecon reconstruct`` and ``gsrecon diag``:

    python scripts/file_pipeline.py --workdir /tmp/gsrecon_demo
"""
import argparse
import os
import subprocess
import sys

from gsrecon import formats, simulate
from gsrecon import experiments as ex
from gsrecon.bases import BasisSpec, build_basis
from gsrecon.grid import make_grid


def gsrecon(*argv):
    cmd = [sys.executable, "-m", "gsrecon.cli", *map(str, argv)]
    print("$ gsrecon " + " ".join(map(str, argv)), flush=True)
    subprocess.run(cmd, check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workdir", default="results/file_pipeline")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    d = formats.ensure_dir(args.workdir)

    resolution, p, q, n, m = 2048, 128, 12, 128, 10
    grid = make_grid(1, resolution)
    rec = build_basis(BasisSpec("wavelet", p, s=4), grid)
    samp = build_basis(BasisSpec("fourier", q), grid)
    gen = simulate.gaussian_model_1d(grid)
    T = simulate.make_training_set(gen, n, rec, 0.01, simulate.rng_stream(args.seed, 0))
    f = gen(simulate.rng_stream(args.seed, 1))
    b = simulate.measure(f, samp, ex.SIGMA_1D, simulate.rng_stream(args.seed, 2)).values
    formats.write_matrix(os.path.join(d, "training.bin"), T.Y)
    formats.write_matrix(os.path.join(d, "measurements.bin"), b[:, None])
    formats.write_field(os.path.join(d, "truth.bin"), f)

    basis = ["--resolution", resolution, "--q", q, "--s", 4]
    model = os.path.join(d, "model.bin")
    gsrecon("train", "--training", os.path.join(d, "training.bin"), "--m", m,
            "--sigma-tilde", 0.01, "--out", model)
    gsrecon("reconstruct", "--measurements", os.path.join(d, "measurements.bin"),
            "--eigenmodel", model, *basis, "--truth", os.path.join(d, "truth.bin"),
            "--output-dir", os.path.join(d, "gsfpca"))
    gsrecon("reconstruct", "--measurements", os.path.join(d, "measurements.bin"),
            "--p", p, *basis, "--truth", os.path.join(d, "truth.bin"),
            "--output-dir", os.path.join(d, "gs"))
    gsrecon("diag", "--eigenmodel", model, *basis, "--m-values", "1:10:1",
            "--out", os.path.join(d, "diagnostics.csv"))


if __name__ == "__main__":
    main()
