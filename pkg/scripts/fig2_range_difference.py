"""Harvesting range gained by a small cutoff, r*(Lambda) - r*(inf), against the gap.

Usage: python scripts/fig2_range_difference.py [--out-dir results] [--plot]
"""

import os
from dataclasses import dataclass

import numpy as np

from covband.field import DetectorSpec
from covband.harvest import range_difference_detail

from _common import parser, pyplot, write_csv


@dataclass(frozen=True)
class RangeConfig:
    cutoffs: tuple = (0.1, 0.2)
    omega_min: float = 10.0
    omega_max: float = 30.0
    omega_count: int = 41
    sigma: float = 0.5


def compute(cfg: RangeConfig):
    rows = []
    for om in np.linspace(cfg.omega_min, cfg.omega_max, cfg.omega_count):
        det = DetectorSpec(float(om), 1.0, cfg.sigma)
        row = [float(om)]
        for lam in cfg.cutoffs:
            b_lam, b_inf = range_difference_detail(float(om), lam, det)
            row += [b_inf.r_star, b_lam.r_star - b_inf.r_star]
        rows.append(row)
    return rows


def main():
    args = parser(__doc__.splitlines()[0], "results").parse_args()
    cfg = RangeConfig()
    rows = compute(cfg)
    header = ["omega"]
    for lam in cfg.cutoffs:
        header += [f"r_star_inf_{lam:g}", f"delta_r_cutoff_{lam:g}"]
    write_csv(os.path.join(args.out_dir, "fig2_range_difference.csv"), header, rows)
    plt = pyplot() if args.plot else None
    if plt:
        data = np.array(rows)
        for j, lam in enumerate(cfg.cutoffs):
            plt.plot(data[:, 0], data[:, 2 + 2 * j], label=f"Lambda = {lam:g}")
        plt.xlabel("Omega tau")
        plt.ylabel("delta r / tau")
        plt.legend()
        plt.savefig(os.path.join(args.out_dir, "fig2_range_difference.png"), dpi=150)


if __name__ == "__main__":
    main()
