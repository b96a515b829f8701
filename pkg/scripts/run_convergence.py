#!/usr/bin/env python3
"""Grid-refinement study for the dam-break scenario.

With --newtonian the elastic modulus is set to zero and the error is
measured against the exact shallow-water solution; otherwise the finest
level serves as the reference.
"""

import argparse
import dataclasses

from fenepsv.model import PhysParams
from fenepsv.scenarios import convergence_study, preset_dam_break


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ell", type=float, default=10.0)
    ap.add_argument("--levels", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--newtonian", action="store_true", help="G = 0, compare to exact solution")
    args = ap.parse_args()

    cfg = preset_dam_break(args.ell)
    if args.newtonian:
        cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, G=0.0))

    result = convergence_study(cfg, args.levels)
    print(f"reference: {result.reference}")
    print(result.table())


if __name__ == "__main__":
    main()
