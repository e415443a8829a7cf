#!/usr/bin/env python3
"""Run the 1D Monte Carlo studies and write one result directory per study.

    python scripts/reproduce_1d.py --output-dir results/1d

Studies: the headline method comparison (fig3), the four parameter sweeps
(fig4_q, fig4_n, fig4_p, fig4_sigma) and noiseless resolution growth (fig5).
"""
import argparse
import os
import time

from gsrecon import experiments as ex

STUDIES = {
    "fig3": {"scenario": "fig3"},
    "fig4_q": {"scenario": "fig4_sweep", "sweep": "q"},
    "fig4_n": {"scenario": "fig4_sweep", "sweep": "n"},
    "fig4_p": {"scenario": "fig4_sweep", "sweep": "p"},
    "fig4_sigma": {"scenario": "fig4_sweep", "sweep": "sigma"},
    "fig5": {"scenario": "fig5_noiseless"},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output-dir", default="results/1d")
    ap.add_argument("--repetitions", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--only", nargs="*", choices=sorted(STUDIES), help="subset of studies")
    args = ap.parse_args()

    for name in args.only or STUDIES:
        settings = {**STUDIES[name], "repetitions": args.repetitions, "seed": args.seed}
        cfg = ex.make_config(settings)
        t0 = time.perf_counter()
        res = ex.run_experiment(cfg, threads=args.threads)
        out = os.path.join(args.output_dir, name)
        ex.write_outputs(res, out)
        print(f"== {name} ({time.perf_counter() - t0:.1f}s) -> {out}")
        for row in res.summary_rows():
            *point, method, med, q25, q75, _, n_ok, n_ill = row
            label = " ".join(str(v) for v in point)
            print(f"  {label:>14} {method:<20} median {med:.4g}  IQR [{q25:.4g}, {q75:.4g}]"
                  f"  ok {n_ok}  ill-posed {n_ill}")


if __name__ == "__main__":
    main()
