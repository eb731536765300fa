#!/usr/bin/env python3
"""Flat-channel transmit-power sweep (the headline experiment).

Sweeps a shared input/transmit power budget over a flat channel with N
sub-carriers and compares the HPA-aware designs (model1, model2) against the
ideal-amplifier optimum and the HPA-unaware baseline.  Writes the standard
sweep CSV and, with --plot, a two-panel figure: harvested z_dc and end-to-end
PTE versus the power budget.

Typical use:
    python3 scripts/run_flat_sweep.py --out results/flat_sweep.csv --plot
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from wptwave.cli import config_from_json, run_sweep


def build_config(args):
    return {
        "scenario": "flat",
        "n_subcarriers": args.subcarriers,
        "sweep": {
            "variable": "p_both_dbw",
            "grid": list(np.arange(args.p_min, args.p_max + 1e-9, args.p_step)),
        },
        "methods": args.methods.split(","),
        "sspa": {"a_s_db": args.a_s_db, "beta": args.beta},
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("flat_sweep.csv"))
    ap.add_argument("--subcarriers", type=int, default=8)
    ap.add_argument("--p-min", type=float, default=-10.0, help="dBW")
    ap.add_argument("--p-max", type=float, default=12.0, help="dBW")
    ap.add_argument("--p-step", type=float, default=2.0)
    ap.add_argument("--a-s-db", type=float, default=10.0, help="saturation amplitude, dBV")
    ap.add_argument("--beta", type=float, default=4.0, help="amplifier knee sharpness")
    ap.add_argument(
        "--methods", default="ideal,model1,model2,no_hpa",
        help="comma-separated subset of the CLI method names",
    )
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args(argv)

    cfg = config_from_json(build_config(args))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(cfg, output=str(args.out))
    print(f"wrote {len(rows)} rows -> {args.out}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (ax_z, ax_pte) = plt.subplots(1, 2, figsize=(10, 4))
        for method in cfg.methods:
            pts = sorted(
                (r["sweep_value"], r["z_dc"], r["pte"])
                for r in rows
                if r["method"] == method
            )
            p, z, pte = zip(*pts)
            ax_z.semilogy(p, z, marker="o", label=method)
            ax_pte.plot(p, pte, marker="o", label=method)
        ax_z.set_xlabel("power budget (dBW)")
        ax_z.set_ylabel("z_dc (rectenna DC proxy)")
        ax_pte.set_xlabel("power budget (dBW)")
        ax_pte.set_ylabel("PTE")
        ax_z.grid(alpha=0.3)
        ax_pte.grid(alpha=0.3)
        ax_z.legend()
        png = args.out.with_suffix(".png")
        fig.tight_layout()
        fig.savefig(png, dpi=150)
        print(f"plot -> {png}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
