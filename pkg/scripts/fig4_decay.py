"""Decay profile r I(r, 0) of the acausal term for several cutoffs.

Usage: python scripts/fig4_decay.py [--out-dir results] [--plot]
"""

import os
from dataclasses import dataclass

import numpy as np

from covband.comm import acausal_closed_form, oscillation_wavelength

from _common import parser, pyplot, write_csv


@dataclass(frozen=True)
class DecayConfig:
    cutoffs: tuple = (0.5, 1.0, 2.0)
    r_min: float = 1.0
    r_max: float = 50.0
    r_count: int = 1000


def compute(cfg: DecayConfig):
    rs = np.linspace(cfg.r_min, cfg.r_max, cfg.r_count)
    cols = [rs] + [rs * acausal_closed_form(rs, 0.0, lam) for lam in cfg.cutoffs]
    for lam, y in zip(cfg.cutoffs, cols[1:]):
        print(f"Lambda = {lam:g}: wavelength {oscillation_wavelength(rs, y):.4f} (2 pi / Lambda = {2 * np.pi / lam:.4f})")
    return [list(map(float, row)) for row in zip(*cols)]


def main():
    args = parser(__doc__.splitlines()[0], "results").parse_args()
    cfg = DecayConfig()
    rows = compute(cfg)
    header = ["r"] + [f"r_times_I_cutoff_{lam:g}" for lam in cfg.cutoffs]
    write_csv(os.path.join(args.out_dir, "fig4_decay.csv"), header, rows)
    plt = pyplot() if args.plot else None
    if plt:
        data = np.array(rows)
        for j, lam in enumerate(cfg.cutoffs, start=1):
            plt.plot(data[:, 0], data[:, j], label=f"Lambda = {lam:g}")
        plt.xlabel("r / tau")
        plt.ylabel("r I(r, 0)")
        plt.legend()
        plt.savefig(os.path.join(args.out_dir, "fig4_decay.png"), dpi=150)


if __name__ == "__main__":
    main()
