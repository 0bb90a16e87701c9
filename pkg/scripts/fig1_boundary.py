"""Harvesting boundary r*(Omega) for two finite cutoffs.

Usage: python scripts/fig1_boundary.py [--out-dir results] [--plot]
"""

import os
from dataclasses import dataclass

import numpy as np

from covband.field import DetectorSpec
from covband.harvest import harvesting_boundary

from _common import parser, pyplot, write_csv


@dataclass(frozen=True)
class BoundaryConfig:
    cutoffs: tuple = (10.0, 2.5)
    omega_min: float = 5.0
    omega_max: float = 40.0
    omega_count: int = 36
    sigma: float = 0.5


def compute(cfg: BoundaryConfig):
    rows = []
    for om in np.linspace(cfg.omega_min, cfg.omega_max, cfg.omega_count):
        det = DetectorSpec(float(om), 1.0, cfg.sigma)
        rows.append([float(om)] + [harvesting_boundary(float(om), lam, det).r_star for lam in cfg.cutoffs])
    return rows


def main():
    args = parser(__doc__.splitlines()[0], "results").parse_args()
    cfg = BoundaryConfig()
    rows = compute(cfg)
    header = ["omega"] + [f"r_star_cutoff_{lam:g}" for lam in cfg.cutoffs]
    write_csv(os.path.join(args.out_dir, "fig1_boundary.csv"), header, rows)
    plt = pyplot() if args.plot else None
    if plt:
        data = np.array(rows)
        for j, lam in enumerate(cfg.cutoffs, start=1):
            plt.plot(data[:, 0], data[:, j], label=f"Lambda = {lam:g}")
        plt.xlabel("Omega tau")
        plt.ylabel("r* / tau")
        plt.legend()
        plt.savefig(os.path.join(args.out_dir, "fig1_boundary.png"), dpi=150)


if __name__ == "__main__":
    main()
