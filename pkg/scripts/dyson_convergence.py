"""Error of the trapezoidal Volterra solution against the closed sinc form as the step shrinks.

    python scripts/dyson_convergence.py --seeds 0 1 2 --family alda --levels 4
"""

import argparse

import numpy as np

from lrdyson.dyson import TimeGrid, casida_operator, chiF_time_sinc, default_time_step, solve_dyson_time
from lrdyson.models import make_kernel, random_system
from lrdyson.response import chi0_time
from lrdyson.verify import limit_coupling, rel_frobenius


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--family", default="rpa", choices=["rpa", "alda", "pgg"])
    ap.add_argument("--levels", type=int, default=3, help="number of step halvings")
    args = ap.parse_args()

    print(f"{'seed':>4} {'dt':>10} {'steps':>7} {'rel_error':>11} {'ratio':>7}")
    for seed in args.seeds:
        s = random_system(seed)
        ctx = s.context
        F = limit_coupling(ctx, make_kernel(args.family, s))
        C = casida_operator(ctx, F)
        t_max = 20.0 / ctx.omega1
        prev = None
        for level in range(args.levels):
            dt = default_time_step(ctx) / 2**level
            grid = TimeGrid.covering(t_max, dt)
            t = grid.times
            err = rel_frobenius(solve_dyson_time(chi0_time(ctx, t), F, grid), chiF_time_sinc(ctx, C, t))
            ratio = prev / err if prev and err else np.nan
            print(f"{seed:>4} {dt:>10.3e} {grid.steps:>7} {err:>11.3e} {ratio:>7.3f}")
            prev = err


if __name__ == "__main__":
    main()
