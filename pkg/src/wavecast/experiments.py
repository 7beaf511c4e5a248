"""Seeded end-to-end runs shared by the command line and the scripts."""

from __future__ import annotations

from dataclasses import dataclass

from .config import RunConfig
from .data import Dataset
from .errors import ConfigurationError
from .metrics import MetricsReport
from .sim.flume import generate_dataset
from .training import RunOutcome, persistence_baseline, train_and_evaluate


def dataset_name(cfg: RunConfig) -> str:
    return f"hs{cfg.wave.Hs:g}_tp{cfg.wave.Tp:g}_rw{cfg.body.rw:g}_seed{cfg.seed}"


def simulate(cfg: RunConfig) -> Dataset:
    """Generate the flume record a run configuration describes."""
    if abs(cfg.mooring.z_bot + cfg.wave.depth) > 1e-12:
        raise ConfigurationError(f"mooring.z_bot ({cfg.mooring.z_bot}) must equal -wave.depth ({-cfg.wave.depth})")
    ds = generate_dataset(
        cfg.wave_condition(), cfg.body.build(), cfg.mooring_specs(), cfg.transmission,
        cfg.sim.duration, cfg.sim.dt, cfg.layout,
    )
    ds.name = dataset_name(cfg)
    ds.meta["seed"] = str(cfg.seed)
    return ds


@dataclass
class ProtocolResult:
    seed: int
    ablation: str
    outcome: RunOutcome
    persistence: MetricsReport

    @property
    def test_mse(self) -> float:
        return self.outcome.report.aggregate.mse

    @property
    def val_mse(self) -> float:
        return self.outcome.result.best_val

    @property
    def beats_persistence(self) -> bool:
        return self.test_mse < self.persistence.aggregate.mse


def protocol_run(ds: Dataset, cfg: RunConfig, ablation: str = "full", log=None) -> ProtocolResult:
    """Train one ablation setting on ``ds`` with the seeds ``cfg`` derives, then score it."""
    mcfg = cfg.model_config().with_ablation(ablation)
    out = train_and_evaluate(ds, mcfg, cfg.train_config(), ablation, {"ablation": ablation, "seed": cfg.seed}, log=log)
    base = persistence_baseline(out.prepared.test, mcfg.target_indices, {"dataset": ds.name})
    return ProtocolResult(cfg.seed, ablation, out, base)
