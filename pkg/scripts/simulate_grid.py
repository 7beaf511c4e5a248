"""Generate flume records over a grid of wave heights, periods and relative densities.

    python3 scripts/simulate_grid.py --out data/ --hs 0.12 0.15 0.18 --tp 1.5 2.0 --rw 0.5 0.8

One CSV (plus .meta) per (Hs, Tp, RW) point, named like ``hs0.18_tp2_rw0.5_seed0.csv``.
Unstable points are reported and skipped.
"""

import argparse
import itertools
import sys
from dataclasses import replace
from pathlib import Path

from wavecast.config import RunConfig, load_config
from wavecast.data import write_csv
from wavecast.errors import InstabilityError
from wavecast.experiments import dataset_name, simulate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", required=True)
    ap.add_argument("--hs", type=float, nargs="+", default=[0.18])
    ap.add_argument("--tp", type=float, nargs="+", default=[2.0])
    ap.add_argument("--rw", type=float, nargs="+", default=[0.5])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--duration", type=float)
    args = ap.parse_args(argv)

    base = (load_config(args.config) if args.config else RunConfig()).with_seed(args.seed)
    if args.duration is not None:
        base = replace(base, sim=replace(base.sim, duration=args.duration))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for hs, tp, rw in itertools.product(args.hs, args.tp, args.rw):
        cfg = replace(base, wave=replace(base.wave, Hs=hs, Tp=tp), body=replace(base.body, rw=rw))
        try:
            path = write_csv(simulate(cfg), out / f"{dataset_name(cfg)}.csv")
            print(path)
        except InstabilityError as exc:
            failed += 1
            print(f"{dataset_name(cfg)}: {exc}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
