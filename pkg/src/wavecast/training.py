"""Windowing, splits, Adam, early stopping, training and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import autodiff as ad
from .checkpoint import Checkpoint, Normalizer
from .data import Dataset
from .errors import ConfigurationError, DivergenceError, IncompatibleCheckpointError, InsufficientDataError
from .metrics import MetricsReport, build_report, fingerprint
from .model import ENDO_NAMES, EXO_NAMES, HEAD_NAMES, ModelConfig, ModelParams, forward, init_params, mse_loss
from .seeding import derive_rng

N_ENDO = len(ENDO_NAMES)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch: int = 32
    max_epochs: int = 20
    patience: Optional[int] = 3  # None disables early stopping
    dropout: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigurationError(f"lr must be non-negative, got {self.lr}")
        if self.batch < 1 or self.max_epochs < 1:
            raise ConfigurationError("batch and max_epochs must be positive")
        if self.patience is not None and not 1 <= self.patience <= self.max_epochs:
            raise ConfigurationError(f"patience must lie in [1, max_epochs], got {self.patience}")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps_opt > 0):
            raise ConfigurationError("Adam needs beta1, beta2 in [0, 1) and eps_opt > 0")


# --- splits and windows ---------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: range
    val: range
    test: range

    def __iter__(self):
        return iter((self.train, self.val, self.test))


def chrono_split(n_rows: int, fractions=(0.7, 0.1, 0.2), min_rows: int = 0) -> Split:
    """Contiguous train/val/test ranges with boundaries at floor(N * cumulative fraction)."""
    fr = [float(f) for f in fractions]
    if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    # the small nudge keeps 100 * (0.7 + 0.1) from flooring to 79
    b1 = int(math.floor(n_rows * fr[0] + 1e-9))
    b2 = int(math.floor(n_rows * (fr[0] + fr[1]) + 1e-9))
    split = Split(range(0, b1), range(b1, b2), range(b2, n_rows))
    for name, r in zip(("train", "val", "test"), split):
        if len(r) < min_rows:
            raise InsufficientDataError(f"{name} split has {len(r)} rows, windows need {min_rows}")
    return split


@dataclass
class WindowSet:
    """Stride-1 windows: x [n, L, F], z [n, L, C], y [n, H, F]; ``starts`` are row indices."""

    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    starts: np.ndarray

    def __len__(self) -> int:
        return len(self.starts)

    def subset(self, idx) -> "WindowSet":
        return WindowSet(self.x[idx], self.z[idx], self.y[idx], self.starts[idx])

    def exo(self, count: int) -> "WindowSet":
        return WindowSet(self.x, self.z[..., :count], self.y, self.starts)


def make_windows(endo: np.ndarray, exo: np.ndarray, rows: range, L: int, H: int) -> WindowSet:
    rows = range(rows.start, rows.stop) if isinstance(rows, range) else range(*rows)
    if len(rows) < L + H:
        raise InsufficientDataError(f"{len(rows)} rows cannot hold one window of {L}+{H}")
    seg_x = np.asarray(endo, dtype=float)[rows.start:rows.stop]
    seg_z = np.asarray(exo, dtype=float)[rows.start:rows.stop]
    n = len(rows) - (L + H) + 1
    # sliding_window_view puts the window axis last: [n, F, L] -> [n, L, F]
    x = sliding_window_view(seg_x[: n + L - 1], L, axis=0).transpose(0, 2, 1)
    z = sliding_window_view(seg_z[: n + L - 1], L, axis=0).transpose(0, 2, 1)
    y = sliding_window_view(seg_x[L:], H, axis=0).transpose(0, 2, 1)
    return WindowSet(x, z, y, rows.start + np.arange(n))


@dataclass
class Prepared:
    """Everything the loop needs from one dataset."""

    split: Split
    train: WindowSet
    val: WindowSet
    test: WindowSet
    normalizer: Normalizer


def prepare(ds: Dataset, cfg: ModelConfig, tcfg: TrainConfig, normalizer: Normalizer | None = None) -> Prepared:
    """Split, fit (or reuse) the scaler on training rows and window every split."""
    if cfg.F != N_ENDO:
        raise ConfigurationError(f"datasets carry {N_ENDO} gauges, model expects F={cfg.F}")
    if not 1 <= cfg.C <= len(EXO_NAMES):
        raise ConfigurationError(f"exogenous count C={cfg.C} must lie in 1..{len(EXO_NAMES)}")
    split = chrono_split(len(ds), min_rows=cfg.L + cfg.H)
    if normalizer is None:
        normalizer = (
            Normalizer.fit(ds.channels[split.train.start:split.train.stop])
            if tcfg.normalize else Normalizer.identity(ds.channels.shape[1])
        )
    exo = ds.exo[:, : cfg.C]
    sets = [make_windows(ds.endo, exo, r, cfg.L, cfg.H) for r in split]
    return Prepared(split, *sets, normalizer)


# --- optimiser ------------------------------------------------------------


@dataclass
class OptimizerState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros(cls, params: ModelParams, names: Iterable[str]) -> "OptimizerState":
        names = list(names)
        return cls({k: np.zeros_like(params[k]) for k in names}, {k: np.zeros_like(params[k]) for k in names}, 0)


def optimizer_step(params: ModelParams, grads: dict, st: OptimizerState, cfg: TrainConfig):
    """Bias-corrected Adam update of every parameter that has a moment buffer."""
    bad = [k for k in st.m if not np.all(np.isfinite(grads[k]))]
    if bad:
        raise DivergenceError(f"non-finite gradient in {', '.join(bad)} at optimizer step {st.t + 1}")
    st.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1**st.t
    c2 = 1.0 - b2**st.t
    for k in st.m:
        g = grads[k]
        st.m[k] = b1 * st.m[k] + (1.0 - b1) * g
        st.v[k] = b2 * st.v[k] + (1.0 - b2) * g * g
        if cfg.lr:
            params[k] = params[k] - cfg.lr * (st.m[k] / c1) / (np.sqrt(st.v[k] / c2) + cfg.eps_opt)
    return params, st


class EarlyStopping:
    """Stop once ``patience`` epochs pass without a strictly lower validation loss."""

    def __init__(self, patience: Optional[int]):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; True means improved."""
        if val_loss < self.best:
            self.best, self.best_epoch, self.wait = val_loss, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.patience is not None and self.wait >= self.patience


# --- loop -----------------------------------------------------------------


def _scaled(ws: WindowSet, norm: Normalizer, C: int):
    endo = slice(0, N_ENDO)
    exo = slice(N_ENDO, N_ENDO + C)
    return norm.apply(ws.x, endo), norm.apply(ws.z, exo), norm.apply(ws.y, endo)


def predict(params: ModelParams, cfg: ModelConfig, ws: WindowSet, norm: Normalizer, batch: int = 256) -> np.ndarray:
    """Physical-unit forecasts shaped like ``ws.y`` ([n, H, F])."""
    out = np.empty(ws.y.shape)
    leaves = {k: ad.Tensor(v) for k, v in params.items()}
    for s in range(0, len(ws), batch):
        part = ws.subset(slice(s, s + batch))
        x, z, _ = _scaled(part, norm, cfg.C)
        yhat = forward(x, z, leaves, cfg).data  # [b, F, H]
        out[s:s + batch] = norm.inverse(yhat.transpose(0, 2, 1), slice(0, N_ENDO))
    return out


def loss_on(params: ModelParams, cfg: ModelConfig, ws: WindowSet, norm: Normalizer, batch: int = 256) -> float:
    """Eval-mode training objective (normalised target-gauge MSE) over a window set."""
    total = 0.0
    leaves = {k: ad.Tensor(v) for k, v in params.items()}
    for s in range(0, len(ws), batch):
        x, z, y = _scaled(ws.subset(slice(s, s + batch)), norm, cfg.C)
        yhat = forward(x, z, leaves, cfg)
        total += mse_loss(yhat, y.transpose(0, 2, 1), cfg.target_indices).item() * len(x)
    return total / len(ws)


@dataclass
class TrainResult:
    params: ModelParams
    history: list  # (epoch, train_loss, val_loss); epoch 0 = before training
    best_epoch: int
    best_val: float
    stopped_early: bool
    normalizer: Normalizer
    config: ModelConfig


def train(
    cfg: ModelConfig,
    params: ModelParams | None,
    train_ws: WindowSet,
    val_ws: WindowSet,
    tcfg: TrainConfig,
    normalizer: Normalizer | None = None,
    trainable: Iterable[str] | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Mini-batch Adam with seeded shuffling; returns the best-validation parameters."""
    if len(train_ws) == 0 or len(val_ws) == 0:
        raise InsufficientDataError("training and validation sets must be nonempty")
    cfg = replace(cfg, dropout_rate=tcfg.dropout)
    params = init_params(cfg) if params is None else params.copy()
    params.check(cfg)
    norm = normalizer or Normalizer.identity(N_ENDO + cfg.C)
    names = list(params.names() if trainable is None else trainable)
    unknown = set(names) - set(params.names())
    if unknown:
        raise ConfigurationError(f"unknown trainable parameters: {sorted(unknown)}")
    st = OptimizerState.zeros(params, names)
    shuffle_rng = derive_rng(tcfg.seed, "shuffle")
    drop_rng = derive_rng(tcfg.seed, "dropout")
    x_all, z_all, y_all = _scaled(train_ws, norm, cfg.C)
    y_all = y_all.transpose(0, 2, 1)

    history = [(0, loss_on(params, cfg, train_ws, norm), loss_on(params, cfg, val_ws, norm))]
    stopper = EarlyStopping(tcfg.patience)
    stopper.update(0, history[0][2])
    best = params.copy()
    stopped = False
    for epoch in range(1, tcfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_ws))
        total = 0.0
        for b, s in enumerate(range(0, len(order), tcfg.batch)):
            idx = order[s:s + tcfg.batch]
            leaves = params.leaves(names)
            with ad.Tape() as tape:
                yhat = forward(x_all[idx], z_all[idx], leaves, cfg, train=True, rng=drop_rng)
                loss = mse_loss(yhat, y_all[idx], cfg.target_indices)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(f"loss became {value} at epoch {epoch}, batch {b}")
            ad.backward(loss, tape)
            # arrays an ablated model never reads get no gradient at all
            grads = {k: leaves[k].grad if leaves[k].grad is not None else np.zeros_like(params[k]) for k in names}
            optimizer_step(params, grads, st, tcfg)
            total += value * len(idx)
        val = loss_on(params, cfg, val_ws, norm)
        if not math.isfinite(val):
            raise DivergenceError(f"validation loss became {val} at epoch {epoch}")
        history.append((epoch, total / len(train_ws), val))
        if stopper.update(epoch, val):
            best = params.copy()
        if log:
            log(f"epoch {epoch}: train {total / len(train_ws):.6g} val {val:.6g}")
        if stopper.should_stop:
            stopped = True
            break
    return TrainResult(best, history, stopper.best_epoch, stopper.best, stopped, norm, cfg)


# --- evaluation -----------------------------------------------------------


def _provenance(cfg: ModelConfig, extra: dict | None) -> dict:
    prov = {"model": cfg.to_dict()}
    prov.update(extra or {})
    return prov


def evaluate(
    params: ModelParams, cfg: ModelConfig, ws: WindowSet, norm: Normalizer, provenance: dict | None = None
) -> MetricsReport:
    if len(ws) == 0:
        raise InsufficientDataError("cannot evaluate on an empty window set")
    t = list(cfg.target_indices)
    yhat = predict(params, cfg, ws, norm)
    return build_report(ws.y[:, :, t], yhat[:, :, t], [ENDO_NAMES[i] for i in t], _provenance(cfg, provenance))


def persistence_baseline(ws: WindowSet, targets=(5, 6, 7, 8), provenance: dict | None = None) -> MetricsReport:
    """Hold each gauge's last observed value for the whole horizon."""
    if len(ws) == 0:
        raise InsufficientDataError("cannot evaluate on an empty window set")
    t = list(targets)
    last = ws.x[:, -1, :][:, None, :]
    yhat = np.broadcast_to(last, ws.y.shape)
    prov = {"model": "persistence"}
    prov.update(provenance or {})
    return build_report(ws.y[:, :, t], yhat[:, :, t], [ENDO_NAMES[i] for i in t], prov)


# --- experiments ----------------------------------------------------------


@dataclass
class RunOutcome:
    name: str
    result: TrainResult
    report: MetricsReport
    prepared: Prepared = field(repr=False)


def train_and_evaluate(ds: Dataset, cfg: ModelConfig, tcfg: TrainConfig, name: str = "run",
                       provenance: dict | None = None, log=None) -> RunOutcome:
    prep = prepare(ds, cfg, tcfg)
    res = train(cfg, None, prep.train, prep.val, tcfg, prep.normalizer, log=log)
    prov = {"dataset": ds.name, "rows": len(ds), "train": _train_dict(tcfg), "run": name}
    prov.update(provenance or {})
    report = evaluate(res.params, res.config, prep.test, prep.normalizer, prov)
    return RunOutcome(name, res, report, prep)


def _train_dict(tcfg: TrainConfig) -> dict:
    from dataclasses import asdict

    return asdict(tcfg)


def run_ablation(ds: Dataset, base: ModelConfig, tcfg: TrainConfig, names=("e2eca", "ta-e2eca", "dbfm-e2eca", "full"),
                 log=None) -> dict[str, RunOutcome]:
    """Train and test each ablation toggle set with identical seeds and splits."""
    return {
        n: train_and_evaluate(ds, base.with_ablation(n), tcfg, n, {"ablation": n}, log=log) for n in names
    }


SWEEP_AXES = {"layers": (1, 2, 3, 4), "exo_count": (1, 2, 3)}


def run_sweep(ds: Dataset, axis: str, base: ModelConfig, tcfg: TrainConfig, values=None,
              log=None) -> dict[int, RunOutcome]:
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    values = SWEEP_AXES[axis] if values is None else tuple(values)
    out = {}
    for v in values:
        cfg = replace(base, n_layers=v) if axis == "layers" else replace(base, C=v)
        out[v] = train_and_evaluate(ds, cfg, tcfg, f"{axis}={v}", {"sweep_axis": axis, "sweep_value": v}, log=log)
    return out


def comparison_rows(outcomes: dict) -> list[dict]:
    rows = []
    for key, o in outcomes.items():
        a = o.report.aggregate
        rows.append({
            "setting": key, "mse": a.mse, "mae": a.mae, "rmse": a.rmse, "mape": a.mape,
            "val_mse": o.result.best_val, "best_epoch": o.result.best_epoch,
        })
    return rows


def check_compatible(ckpt: Checkpoint, ds: Dataset) -> None:
    cfg = ckpt.config
    if cfg.F != ds.endo.shape[1] or cfg.C > ds.exo.shape[1]:
        raise IncompatibleCheckpointError(
            f"checkpoint expects F={cfg.F}, C={cfg.C}; dataset has {ds.endo.shape[1]} gauges, {ds.exo.shape[1]} motions"
        )
    if len(ckpt.normalizer.mean) != N_ENDO + len(EXO_NAMES):
        raise IncompatibleCheckpointError("checkpoint scaler does not cover the 12 dataset channels")


def fine_tune_head(ckpt: Checkpoint, ds: Dataset, tcfg: TrainConfig, log=None) -> TrainResult:
    """Retrain only the output head on ``ds``; every other array stays bit-identical."""
    check_compatible(ckpt, ds)
    prep = prepare(ds, ckpt.config, tcfg, normalizer=ckpt.normalizer)
    res = train(ckpt.config, ckpt.params, prep.train, prep.val, tcfg, ckpt.normalizer, trainable=HEAD_NAMES, log=log)
    frozen = [k for k in ckpt.params.names() if k not in HEAD_NAMES]
    moved = [k for k in frozen if not np.array_equal(ckpt.params[k], res.params[k])]
    if moved:
        raise AssertionError(f"frozen parameters changed during fine-tuning: {moved}")
    return res


def config_fingerprint(cfg: ModelConfig, tcfg: TrainConfig, extra: dict | None = None) -> str:
    return fingerprint({"model": cfg.to_dict(), "train": _train_dict(tcfg), **(extra or {})})
