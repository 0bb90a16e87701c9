"""Negativity against separation at a large gap, for a small and a large cutoff.

Values are reported scaled by exp(tau^2 Omega^2) since the plain ones underflow.

Usage: python scripts/fig3_negativity.py [--out-dir results] [--plot]
"""

import os
from dataclasses import dataclass

import numpy as np

from covband.field import DetectorSpec
from covband.harvest import local_noise_scaled, nonlocal_M_scaled

from _common import parser, pyplot, write_csv


@dataclass(frozen=True)
class NegativityConfig:
    omega: float = 40.0
    cutoffs: tuple = (0.1, 10.0)
    r_min: float = 2.0
    r_max: float = 85.0
    r_count: int = 400
    sigma: float = 0.5


def compute(cfg: NegativityConfig):
    det = DetectorSpec(cfg.omega, 1.0, cfg.sigma)
    rs = np.linspace(cfg.r_min, cfg.r_max, cfg.r_count)
    l_s = local_noise_scaled(det).real
    cols = [rs]
    for lam in cfg.cutoffs:
        m, _ = nonlocal_M_scaled(rs, lam, det)
        cols.append(np.maximum(0.0, np.abs(m) - l_s))
    return [list(map(float, row)) for row in zip(*cols)]


def main():
    args = parser(__doc__.splitlines()[0], "results").parse_args()
    cfg = NegativityConfig()
    rows = compute(cfg)
    header = ["r"] + [f"N_scaled_cutoff_{lam:g}" for lam in cfg.cutoffs]
    write_csv(os.path.join(args.out_dir, "fig3_negativity.csv"), header, rows)
    plt = pyplot() if args.plot else None
    if plt:
        data = np.array(rows)
        for j, lam in enumerate(cfg.cutoffs, start=1):
            plt.semilogy(data[:, 0], np.where(data[:, j] > 0, data[:, j], np.nan), label=f"Lambda = {lam:g}")
        plt.xlabel("r / tau")
        plt.ylabel("N exp(tau^2 Omega^2)")
        plt.legend()
        plt.savefig(os.path.join(args.out_dir, "fig3_negativity.png"), dpi=150)


if __name__ == "__main__":
    main()
