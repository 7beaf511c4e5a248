"""Score one trained checkpoint on other flume records without retraining.

    python3 scripts/cross_condition.py --checkpoint runs/train/checkpoint.bin data/*.csv

Prints a CSV with the model and persistence MSE/MAE for each record's test split.
The checkpoint's own scaling statistics are applied to every record.
"""

import argparse
import csv
import sys

from wavecast.checkpoint import Checkpoint
from wavecast.data import read_csv
from wavecast.training import TrainConfig, check_compatible, evaluate, persistence_baseline, prepare


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("data", nargs="+")
    args = ap.parse_args(argv)

    ckpt = Checkpoint.load(args.checkpoint)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["dataset", "model_mse", "model_mae", "persistence_mse", "persistence_mae", "windows"])
    for path in args.data:
        ds = read_csv(path)
        check_compatible(ckpt, ds)
        prep = prepare(ds, ckpt.config, TrainConfig(), normalizer=ckpt.normalizer)
        model = evaluate(ckpt.params, ckpt.config, prep.test, ckpt.normalizer).aggregate
        base = persistence_baseline(prep.test, ckpt.config.target_indices).aggregate
        w.writerow([ds.name, repr(model.mse), repr(model.mae), repr(base.mse), repr(base.mae), len(prep.test)])


if __name__ == "__main__":
    main()
