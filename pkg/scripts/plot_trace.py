#!/usr/bin/env python3
"""Plot a simulation trace exported by `quadsafe run`.

Usage:
    python scripts/plot_trace.py OUT_DIR [--save FILE]

Reads OUT_DIR/trace.csv and draws position/velocity traces with their
barrier limits plus the barrier values and applied inputs over time.
Requires matplotlib (install the package with the [plot] extra).
"""

import argparse
import csv
import sys


def load_trace(path):
    cols = {}
    with open(path) as f:
        reader = csv.reader(f)
        header = next(reader)
        for name in header:
            cols[name] = []
        for row in reader:
            for name, val in zip(header, row):
                if name.startswith("qp_"):
                    cols[name].append(val)
                else:
                    cols[name].append(float(val) if val != "" else float("nan"))
    return cols


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", help="directory containing trace.csv")
    ap.add_argument("--save", default=None, help="write the figure to this file")
    args = ap.parse_args(argv)

    try:
        import matplotlib
        if args.save:
            matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib is required: pip install 'quadsafe[plot]'", file=sys.stderr)
        return 1

    tr = load_trace(f"{args.out_dir}/trace.csv")
    t = tr["t"]

    fig, axes = plt.subplots(4, 1, figsize=(10, 12), sharex=True)

    ax = axes[0]
    for name in ("x", "y", "z"):
        ax.plot(t, tr[name], label=name)
    ax.set_ylabel("position [m]")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)

    ax = axes[1]
    for name in ("vx", "vy", "vz"):
        ax.plot(t, tr[name], label=name)
    ax.set_ylabel("velocity [m/s]")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)

    ax = axes[2]
    labels = {"h_alt": "altitude pos", "h_altvel": "altitude pos+vel",
              "h_latpos": "lateral pos", "h_latvel": "lateral vel"}
    for col, label in labels.items():
        if any(v == v for v in tr[col]):  # has non-NaN entries
            ax.plot(t, tr[col], label=label)
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_ylabel("barrier h")
    ax.set_ylim(-1.5, 1.1)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)

    ax = axes[3]
    ax.plot(t, tr["F_star"], label="thrust F*")
    ax.plot(t, tr["Mx_star"], label="moment Mx*")
    ax.plot(t, tr["My_star"], label="moment My*")
    ax.set_ylabel("applied input")
    ax.set_xlabel("t [s]")
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)

    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=130)
        print(f"saved {args.save}")
    else:
        plt.show()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
