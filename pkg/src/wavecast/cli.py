"""``wavecast`` command line: simulate, train, eval, ablate, sweep, finetune.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import autodiff as ad
from .checkpoint import Checkpoint
from .config import RunConfig, load_config
from .data import Dataset, read_csv, write_csv
from .experiments import dataset_name, simulate
from .errors import (
    ConfigurationError,
    DataSchemaError,
    DivergenceError,
    IncompatibleCheckpointError,
    InstabilityError,
    InsufficientDataError,
)
from .metrics import MetricsReport
from .model import ENDO_NAMES, EXO_NAMES, HEAD_NAMES, ABLATIONS, forward
from .training import (
    N_ENDO,
    Prepared,
    TrainResult,
    check_compatible,
    comparison_rows,
    evaluate,
    fine_tune_head,
    persistence_baseline,
    prepare,
    predict,
    run_ablation,
    run_sweep,
    train,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- output helpers -------------------------------------------------------


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _stamp(out: Path, cfg: RunConfig) -> None:
    (out / "config.resolved").write_text(cfg.resolved_text())
    (out / "VERSION").write_text(f"wavecast {__version__}\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["undefined" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    path.write_text(buf.getvalue())


def _write_history(path: Path, res: TrainResult) -> None:
    _write_rows(path, ("epoch", "train_loss", "val_loss"), res.history)


def _write_predictions(path: Path, ws, yhat, targets) -> None:
    n, H, _ = ws.y.shape
    t = list(targets)
    win = np.repeat(np.arange(n), len(t) * H)
    gauge = np.tile(np.repeat(np.array(t) + 1, H), n)
    step = np.tile(np.arange(1, H + 1), n * len(t))
    meas = ws.y[:, :, t].transpose(0, 2, 1).ravel()
    pred = yhat[:, :, t].transpose(0, 2, 1).ravel()
    buf = io.StringIO()
    buf.write("window_index,gauge,step,measured,predicted\n")
    table = np.column_stack([win, gauge, step, meas, pred])
    np.savetxt(buf, table, fmt=["%d", "wg%d", "%d", "%.9g", "%.9g"], delimiter=",")
    path.write_text(buf.getvalue())


def _heatmap(ckpt: Checkpoint, prep: Prepared, batch: int = 256) -> np.ndarray:
    """Cross-attention weights averaged over heads and test windows, [F, C]."""
    cfg = ckpt.config
    norm = prep.normalizer
    ws = prep.test
    total = np.zeros((cfg.F, cfg.C))
    leaves = {k: ad.Tensor(v) for k, v in ckpt.params.items()}
    for s in range(0, len(ws), batch):
        part = ws.subset(slice(s, s + batch))
        trace: dict = {}
        x = norm.apply(part.x, slice(0, N_ENDO))
        z = norm.apply(part.z, slice(N_ENDO, N_ENDO + cfg.C))
        forward(x, z, leaves, cfg, trace=trace)
        total += trace["cross"].sum(axis=0)
    return total / len(ws)


def _write_heatmap(path: Path, weights: np.ndarray, C: int) -> None:
    rows = [[ENDO_NAMES[i]] + [repr(float(v)) for v in weights[i]] for i in range(weights.shape[0])]
    _write_rows(path, ("gauge",) + EXO_NAMES[:C], rows)


def _load_dataset(path) -> Dataset:
    if path is None:
        raise ConfigurationError("--data is required")
    p = Path(path)
    if not p.exists():
        raise DataSchemaError(f"dataset {p} does not exist")
    return read_csv(p)


def _train_provenance(cfg: RunConfig, ds: Dataset, name: str) -> dict:
    return {"dataset": ds.name, "rows": len(ds), "train": asdict(cfg.train_config()), "run": name, "seed": cfg.seed}


def _save_run(out: Path, cfg: RunConfig, ds: Dataset, res: TrainResult, prep: Prepared, prov: dict) -> MetricsReport:
    ckpt = Checkpoint(res.config, res.params, res.normalizer, {"provenance": prov, "best_epoch": res.best_epoch})
    ckpt.save(out / "checkpoint.bin")
    _write_history(out / "loss.csv", res)
    report = evaluate(res.params, res.config, prep.test, prep.normalizer, prov)
    (out / "report.json").write_text(report.to_json())
    return report


# --- commands -------------------------------------------------------------


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(args.out)
    _stamp(out, cfg)
    stem = dataset_name(cfg)
    try:
        ds = simulate(cfg)
    except InstabilityError as exc:
        if exc.partial is not None and len(exc.partial):
            exc.partial.name = stem
            write_csv(exc.partial, out / f"{stem}.partial.csv")
        raise
    path = write_csv(ds, out / f"{stem}.csv")
    _log(f"wrote {path} ({len(ds)} rows)")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    ds = _load_dataset(args.data)
    out = _out_dir(args.out)
    _stamp(out, cfg)
    mcfg = cfg.model_config()
    name = "train"
    if args.ablation:
        mcfg = mcfg.with_ablation(args.ablation)
        name = args.ablation
    tcfg = cfg.train_config()
    prep = prepare(ds, mcfg, tcfg)
    res = train(mcfg, None, prep.train, prep.val, tcfg, prep.normalizer, log=_log)
    report = _save_run(out, cfg, ds, res, prep, _train_provenance(cfg, ds, name))
    _log(f"test MSE {report.aggregate.mse:.6g} (best epoch {res.best_epoch})")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    ds = _load_dataset(args.data)
    ckpt = Checkpoint.load(_require(args.checkpoint, "--checkpoint"))
    check_compatible(ckpt, ds)
    out = _out_dir(args.out)
    _stamp(out, cfg)
    prep = prepare(ds, ckpt.config, cfg.train_config(), normalizer=ckpt.normalizer)
    prov = dict(ckpt.extra.get("provenance", {}))
    if prov.get("dataset") != ds.name:
        prov["evaluated_on"] = ds.name
    report = evaluate(ckpt.params, ckpt.config, prep.test, ckpt.normalizer, prov)
    base = persistence_baseline(prep.test, ckpt.config.target_indices, {"dataset": ds.name})
    (out / "report.json").write_text(report.to_json())
    (out / "persistence.json").write_text(base.to_json())
    rows = [
        (label, r.aggregate.mse, r.aggregate.mae, r.aggregate.rmse, r.aggregate.mape)
        for label, r in (("model", report), ("persistence", base))
    ]
    _write_rows(out / "comparison.csv", ("predictor", "mse", "mae", "rmse", "mape"), rows)
    yhat = predict(ckpt.params, ckpt.config, prep.test, ckpt.normalizer)
    _write_predictions(out / "predictions.csv", prep.test, yhat, ckpt.config.target_indices)
    _write_heatmap(out / "attention.csv", _heatmap(ckpt, prep), ckpt.config.C)
    _log(f"model MSE {report.aggregate.mse:.6g} vs persistence {base.aggregate.mse:.6g}")
    return EXIT_OK


def _write_comparison(out: Path, outcomes: dict, cfg: RunConfig, ds: Dataset, label: str) -> None:
    for key, o in outcomes.items():
        sub = _out_dir(out / str(key).replace("=", "_"))
        _stamp(sub, cfg)
        res = o.result
        prov = o.report.provenance
        Checkpoint(res.config, res.params, res.normalizer, {"provenance": prov, "best_epoch": res.best_epoch}).save(
            sub / "checkpoint.bin"
        )
        _write_history(sub / "loss.csv", res)
        (sub / "report.json").write_text(o.report.to_json())
    rows = comparison_rows(outcomes)
    cols = (label, "mse", "mae", "rmse", "mape", "val_mse", "best_epoch")
    _write_rows(out / "comparison.csv", cols, [[r["setting"]] + [r[c] for c in cols[1:]] for r in rows])


def cmd_ablate(args, cfg: RunConfig) -> int:
    ds = _load_dataset(args.data)
    out = _out_dir(args.out)
    _stamp(out, cfg)
    outcomes = run_ablation(ds, cfg.model_config(), cfg.train_config(), tuple(ABLATIONS), log=_log)
    _write_comparison(out, outcomes, cfg, ds, "configuration")
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    ds = _load_dataset(args.data)
    out = _out_dir(args.out)
    _stamp(out, cfg)
    axis = {"layers": "layers", "exo": "exo_count", "exo_count": "exo_count"}[args.axis]
    outcomes = run_sweep(ds, axis, cfg.model_config(), cfg.train_config(), log=_log)
    _write_comparison(out, outcomes, cfg, ds, axis)
    return EXIT_OK


def cmd_finetune(args, cfg: RunConfig) -> int:
    ds = _load_dataset(args.data)
    ckpt = Checkpoint.load(_require(args.checkpoint, "--checkpoint"))
    out = _out_dir(args.out)
    _stamp(out, cfg)
    tcfg = cfg.train_config()
    res = fine_tune_head(ckpt, ds, tcfg, log=_log)
    frozen = [k for k in ckpt.params.names() if k not in HEAD_NAMES]
    identical = all(np.array_equal(ckpt.params[k], res.params[k]) for k in frozen)
    head_changed = any(not np.array_equal(ckpt.params[k], res.params[k]) for k in HEAD_NAMES)
    lines = [
        f"frozen_arrays={len(frozen)}",
        f"frozen_bit_identical={'true' if identical else 'false'}",
        f"head_changed={'true' if head_changed else 'false'}",
    ]
    (out / "freeze_check.txt").write_text("\n".join(lines) + "\n")
    _log("; ".join(lines))
    prov = {"dataset": ds.name, "rows": len(ds), "train": asdict(tcfg), "run": "finetune", "seed": cfg.seed,
            "base": ckpt.extra.get("provenance", {})}
    prep = prepare(ds, ckpt.config, tcfg, normalizer=ckpt.normalizer)
    _save_run(out, cfg, ds, res, prep, prov)
    return EXIT_OK


def _require(value, flag):
    if value is None:
        raise ConfigurationError(f"{flag} is required")
    p = Path(value)
    if not p.exists():
        raise DataSchemaError(f"{p} does not exist")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "finetune": cmd_finetune,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wavecast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value run configuration (defaults if omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config's seed")
        if name != "simulate":
            p.add_argument("--data", help="dataset CSV")
        if name in ("eval", "finetune"):
            p.add_argument("--checkpoint", help="checkpoint written by train/finetune")
        if name == "train":
            p.add_argument("--ablation", choices=sorted(ABLATIONS))
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=("layers", "exo", "exo_count"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](args, cfg)
    except ConfigurationError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (DataSchemaError, InsufficientDataError, IncompatibleCheckpointError) as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except (InstabilityError, DivergenceError, ad.EvaluationError) as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
