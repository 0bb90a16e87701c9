"""Shared helpers for the experiment scripts: argument parsing, CSV output, optional plots."""

import argparse
import csv
import os


def parser(description: str, default_out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out-dir", default=default_out, help="directory for CSV and PNG output")
    p.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")
    return p


def write_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    print(f"wrote {path}")


def pyplot():
    """Return matplotlib.pyplot with a headless backend, or None if it is missing."""
    try:
        import matplotlib
    except ImportError:
        print("matplotlib not installed; skipping plot")
        return None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt
