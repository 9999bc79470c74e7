"""Vertical-correction size sup_t ||v - v_tau|| as tau shrinks.

    python scripts/tau_sweep.py [--config configs/recover_tau_sweep.yaml] [--taus 0.2 0.1 0.05 0.025 0.0125]
"""
import argparse
import dataclasses
import tempfile
from pathlib import Path

from ymlab import cli
from ymlab.config import load

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", default=str(ROOT / "configs" / "recover_tau_sweep.yaml"))
    p.add_argument("--taus", type=float, nargs="+", default=None)
    args = p.parse_args()
    cfg = load(args.config)
    if args.taus:
        cfg = dataclasses.replace(cfg, taus=tuple(args.taus))
    with tempfile.TemporaryDirectory() as d:
        cfg = dataclasses.replace(cfg, out_dir=d)
        verdicts, m = cli.run_recover(cli.RunContext(cfg, Path(d)))
    print(f"{'tau':>10} {'sup|v - v_tau|':>16} {'ratio to prev':>14}")
    prev = None
    for tau, s in zip(m["taus"], m["sup_diffs"]):
        print(f"{tau:10.4g} {s:16.6e} {'' if prev is None else f'{prev / s:14.3f}'}")
        prev = s
    print(verdicts)


if __name__ == "__main__":
    main()
