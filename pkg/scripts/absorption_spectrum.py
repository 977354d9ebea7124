"""Trace of the polarizability tensor for the bare and the dressed response.

    python scripts/absorption_spectrum.py --config configs/ring4.toml --eta 0.05 --out out/spectrum.csv
"""

import argparse

import numpy as np

from lrdyson.analysis import export_results, polarizability
from lrdyson.cli import kernel_from_config, omega_grid, system_from_config
from lrdyson.config import load_config
from lrdyson.dyson import casida_operator


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", required=True)
    ap.add_argument("--eta", type=float, default=None, help="damping (defaults to grids.eta)")
    ap.add_argument("--out", default="spectrum.csv")
    args = ap.parse_args()

    cfg = load_config(args.config)
    system = system_from_config(cfg)
    ctx = system.context
    F = kernel_from_config(cfg, system)
    eta = cfg.grids.eta if args.eta is None else args.eta
    omega = omega_grid(cfg, system)
    bare = polarizability(ctx, system.space.positions, omega, eta).trace()
    dressed = polarizability(ctx, system.space.positions, omega, eta, casida_operator(ctx, F)).trace()
    export_results((("omega", "bare", "dressed"), list(zip(omega, bare, dressed))), "csv", args.out)
    for label, trace in (("bare", bare), ("dressed", dressed)):
        print(f"{label:8s} strongest peak at omega = {omega[np.argmax(np.abs(trace))]:.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
