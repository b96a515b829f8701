#!/usr/bin/env python3
"""Dam-break sweep over the extensibility parameter.

Runs the standard configuration at ell = 10, 100, 1000 and prints a
comparison table.  Artifacts land in out/dam_break_ell<value>/.
"""

import argparse

import numpy as np

from fenepsv.scenarios import preset_dam_break, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=256)
    ap.add_argument("--t-end", type=float, default=0.1)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    rows = []
    for ell in (10.0, 100.0, 1000.0):
        outdir = f"{args.out}/dam_break_ell{ell:g}"
        cfg = preset_dam_break(ell, cells=args.cells, t_end=args.t_end, outdir=outdir)
        res = run(cfg)
        p = res.final_primitive()
        rows.append(
            (
                ell,
                res.steps,
                res.min_dt,
                float(np.max(p.sxx + p.szz)),
                res.dissipation_violations,
                outdir,
            )
        )

    print(f"{'ell':>8} {'steps':>6} {'min dt':>11} {'max stretch':>12} {'violations':>10}  outdir")
    for ell, steps, min_dt, stretch, viol, outdir in rows:
        print(f"{ell:8g} {steps:6d} {min_dt:11.4e} {stretch:12.6f} {viol:10d}  {outdir}")


if __name__ == "__main__":
    main()
