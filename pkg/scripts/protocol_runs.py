"""Train and score ablation settings over several seeds; print one CSV row per run.

    python3 scripts/protocol_runs.py --seeds 0 1 2 --ablations full e2eca
    python3 scripts/protocol_runs.py --seeds 0 1 2 --per-seed-data

By default every run trains on the dataset generated with seed 0 and only the
model/training seeds vary.  ``--per-seed-data`` regenerates the flume record
for each seed as well.
"""

import argparse
import csv
import sys
import time

from wavecast.config import RunConfig, load_config
from wavecast.experiments import protocol_run, simulate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--ablations", nargs="+", default=["full", "e2eca"])
    ap.add_argument("--per-seed-data", action="store_true")
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    args = ap.parse_args(argv)

    base = load_config(args.config) if args.config else RunConfig()
    shared = None if args.per_seed_data else simulate(base)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "ablation", "val_mse", "test_mse", "persistence_mse", "best_epoch", "epochs", "seconds"])
    for seed in args.seeds:
        cfg = base.with_seed(seed)
        ds = simulate(cfg) if shared is None else shared
        for name in args.ablations:
            t0 = time.time()
            r = protocol_run(ds, cfg, name)
            res = r.outcome.result
            w.writerow([seed, name, repr(r.val_mse), repr(r.test_mse), repr(r.persistence.aggregate.mse),
                        res.best_epoch, res.history[-1][0], f"{time.time() - t0:.1f}"])
            fh.flush()
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
