"""Residual of each lattice identity and the abelian oracle error under h -> h/2.

    python scripts/refinement_study.py [--sizes 8 16 32]
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from ymlab import lie_algebra as la
from ymlab.diagnostics import spatial_identity_residuals
from ymlab.heat_flow import ym_flow
from ymlab.lattice_forms import FormField, Grid, l2_norm
from ymlab.quadrature import TimeGrid
from ymlab.spectral_oracle import helmholtz_split, spectral_heat

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from conftest import smooth_su2_pair  # noqa: E402


def abelian_error(n, T=0.5):
    g = Grid(n)
    modes = lambda K, X, Y, Z: np.stack([0.6 * np.sin(X + Y) * (K == (0,)) - 0.6 * np.sin(X + Y) * (K == (1,))])
    A0, _ = helmholtz_split(FormField.from_function(1, g, la.u1(), modes))
    traj = ym_flow(A0, TimeGrid.geometric(T, 48, 2.0))
    ref = spectral_heat(A0, T, kind="continuum")
    return l2_norm(traj.fields[-1] - ref) / l2_norm(ref)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    args = p.parse_args()
    rows = {}
    for n in args.sizes:
        A, w = smooth_su2_pair(n)
        res = spatial_identity_residuals(A, w)
        res["abelian_oracle"] = abelian_error(n)
        rows[n] = res
    keys = list(rows[args.sizes[0]])
    print("n".ljust(6) + "".join(k.rjust(16) for k in keys))
    for n in args.sizes:
        print(str(n).ljust(6) + "".join(f"{rows[n][k]:16.4e}" for k in keys))
    for n0, n1 in zip(args.sizes[:-1], args.sizes[1:]):
        print(f"{n0}->{n1}".ljust(6) + "".join(f"{rows[n0][k] / rows[n1][k]:16.2f}" for k in keys))


if __name__ == "__main__":
    main()
