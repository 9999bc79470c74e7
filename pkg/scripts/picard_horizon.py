"""Picard correction ratios on a ladder of horizons, against the augmented solve.

    python scripts/picard_horizon.py [--n 8] [--horizons 0.4 0.2 0.1 0.05] [--m 2]
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from ymlab.errors import HorizonTooLong
from ymlab.heat_flow import stable_dt, ym_flow
from ymlab.lattice_forms import l2_norm
from ymlab.quadrature import TimeGrid
from ymlab.variational_flow import solve_augmented, solve_mild_picard

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import smooth_su2_pair  # noqa: E402


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--horizons", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05])
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--iters", type=int, default=8)
    args = p.parse_args()
    A0, w0 = smooth_su2_pair(args.n)
    for T in args.horizons:
        N = max(2, int(np.ceil(T / stable_dt(A0.grid))))
        traj = ym_flow(A0, TimeGrid.uniform(T, N))
        ref = solve_augmented(w0, traj)[-1].w
        try:
            pr = solve_mild_picard(w0, traj, n_iter=args.iters, m=args.m)
        except HorizonTooLong as exc:
            print(f"T={T:<8g} {exc}")
            continue
        err = l2_norm(pr.limit[-1] - ref) / l2_norm(ref)
        ratios = " ".join(f"{r:.3f}" for r in pr.ratios)
        print(f"T={T:<8g} ratios [{ratios}]  limit vs augmented {err:.2e}")


if __name__ == "__main__":
    main()
