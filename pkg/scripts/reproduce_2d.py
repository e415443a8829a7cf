#!/usr/bin/env python3
"""Run the 2D phantom studies: diagnostics against m and three reconstructions.

    python scripts/reproduce_2d.py --output-dir results/2d

Each study trains once on 512 perturbed phantoms (p = 4096 wavelet
coefficients) and takes a few minutes on one core.
"""
import argparse
import os
import time

from gsrecon import experiments as ex

STUDIES = {
    "diagnostics": {"scenario": "phantom_diag"},
    "fourier_q1024": {"scenario": "phantom_recon"},
    "fourier_q256": {"scenario": "phantom_recon", "q": 256, "m": 200},
    "pixel_q256": {"scenario": "phantom_recon", "q": 256, "m": 200, "sampling": "pixel"},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default="results/2d")
    ap.add_argument("--repetitions", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--only", nargs="*", choices=sorted(STUDIES), help="subset of studies")
    args = ap.parse_args()

    for name in args.only or STUDIES:
        settings = {**STUDIES[name], "seed": args.seed}
        if name != "diagnostics":
            settings["repetitions"] = args.repetitions
        cfg = ex.make_config(settings)
        t0 = time.perf_counter()
        res = ex.run_experiment(cfg, threads=args.threads)
        out = os.path.join(args.output_dir, name)
        ex.write_outputs(res, out)
        print(f"== {name} ({time.perf_counter() - t0:.1f}s) -> {out}")
        if res.diagnostics:
            print("  m  explained_variance  sigma_min_reg(pca)  sigma_min_reg(spca)")
            for row in res.diagnostics:
                if row[0] % 50 == 0 or row[0] == 230:
                    print(f"  {row[0]:>3}  {row[1]:.4f}  {row[5]:.4f}  {row[6]:.4f}")
            continue
        for method in cfg.methods:
            print(f"  {method:<20} median error {res.median(method):.4f}"
                  f" (vs raw phantom {res.median(method, 0, 1):.4f})")


if __name__ == "__main__":
    main()
