"""Assemble a gauge/motion record from the incident waves, the moored body
and a synthetic transmission model for the lee side."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..data import Dataset
from ..errors import ConfigurationError, InstabilityError
from ..seeding import derive_rng
from .body import FloatBody, HydroCoefficients, WaveExcitation, fairlead_kinematics, fairlead_offsets
from .cosim import DEGENERATE, run_cosim
from .mooring import MooringLineSpec, initial_shape
from .waves import WaveComponents, WaveCondition, surface_elevation, synthesize_components

MOTIONS = ("surge", "heave", "pitch")


@dataclass(frozen=True)
class TransmissionModel:
    """Lee-side elevation = kt-filtered, delayed incident waves + body radiation.

    ``kt`` fixes a constant transmission coefficient; when it is None a
    smooth low-pass in frequency is used, so long waves pass more easily:
    ``floor + (1 - floor) / sqrt(1 + (w / cutoff)^(2 order))``.
    """

    kt: float | None = None
    kt_floor: float = 0.2
    kt_cutoff: float = 4.0
    kt_order: int = 2
    radiation_gains: tuple = (0.02, 0.05, 0.005)
    delays: tuple = (0.1, 0.2, 0.3, 0.4)
    noise_std: float = 0.0

    def __post_init__(self):
        if self.kt is not None and not 0 < self.kt <= 1:
            raise ConfigurationError(f"kt must lie in (0, 1], got {self.kt}")
        if not 0 < self.kt_floor <= 1 or self.kt_cutoff <= 0 or self.kt_order < 1:
            raise ConfigurationError("kt_floor must lie in (0, 1]; cutoff and order must be positive")
        if len(self.radiation_gains) != 3:
            raise ConfigurationError("radiation_gains needs one value per motion (surge, heave, pitch)")
        if any(d < 0 for d in self.delays):
            raise ConfigurationError("delays must be non-negative")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")

    def kt_values(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        if self.kt is not None:
            return np.full(omega.shape, float(self.kt))
        ratio = (omega / self.kt_cutoff) ** (2 * self.kt_order)
        return self.kt_floor + (1.0 - self.kt_floor) / np.sqrt(1.0 + ratio)


@dataclass
class BodyHistory:
    """Body velocities on a uniform clock starting at ``t0``; rest before it."""

    t0: float
    dt: float
    vel: np.ndarray

    def velocity_at(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        grid = self.t0 + self.dt * np.arange(len(self.vel))
        return np.stack([np.interp(t, grid, self.vel[:, d], left=0.0) for d in range(3)], axis=-1)


def downstream_elevation(
    components: WaveComponents,
    history: BodyHistory | None,
    tm: TransmissionModel,
    x: float,
    t,
    delay: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    passed = components.scaled(tm.kt_values(components.omega))
    out = surface_elevation(passed, x, t - delay)
    if history is not None:
        out = out + history.velocity_at(t - delay) @ np.asarray(tm.radiation_gains, dtype=float)
    if tm.noise_std > 0:
        if rng is None:
            raise ConfigurationError("a random generator is required when noise_std > 0")
        out = out + rng.normal(0.0, tm.noise_std, size=out.shape)
    return out


@dataclass(frozen=True)
class FlumeLayout:
    """Geometry and numerics around the body (everything the paper leaves open)."""

    upstream_x: tuple = (-6.0, -5.0, -4.0, -3.0, -2.0)
    downstream_x: tuple = (2.0, 3.0, 4.0, 5.0)
    anchor_x: tuple = (-1.45, 1.45)
    substep: float = 1e-3
    warmup: float = 10.0
    ramp: float = 5.0
    zeta_heave: float = 0.4
    zeta_pitch: float = 0.5
    surge_decay: float = 0.2

    def __post_init__(self):
        if len(self.upstream_x) != 5 or len(self.downstream_x) != 4:
            raise ConfigurationError("the channel layout needs 5 upstream and 4 downstream gauges")
        if self.substep <= 0 or self.warmup < 0 or self.ramp < 0:
            raise ConfigurationError("substep must be positive, warmup and ramp non-negative")


def _steps(span: float, step: float, what: str) -> int:
    n = span / step
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigurationError(f"{what} ({span}) is not an integer multiple of {step}")
    return int(round(n))


def dataset_stem(cond: WaveCondition, body: FloatBody) -> str:
    return f"hs{cond.Hs:g}_tp{cond.Tp:g}_rw{body.rw:g}_seed{cond.seed}"


def generate_dataset(
    cond: WaveCondition,
    body: FloatBody | None = None,
    moorings: tuple[MooringLineSpec, ...] | None = None,
    tm: TransmissionModel | None = None,
    duration: float = 500.0,
    dt: float = 0.05,
    layout: FlumeLayout | None = None,
) -> Dataset:
    """Co-simulate body and mooring lines and sample the 12 channels every ``dt``.

    The body first settles on its lines for ``layout.warmup`` seconds in
    still water; excitation then ramps in over ``layout.ramp`` seconds from
    t=0.  Upstream gauges see only the incident field.
    """
    body = body or FloatBody()
    tm = tm or TransmissionModel()
    layout = layout or FlumeLayout()
    if moorings is None:
        moorings = (MooringLineSpec(z_bot=-cond.depth), MooringLineSpec(z_bot=-cond.depth))
    if len(moorings) != len(layout.anchor_x):
        raise ConfigurationError(f"{len(moorings)} mooring lines but {len(layout.anchor_x)} anchors")
    if len(moorings) != 2:
        raise ConfigurationError("the box carries exactly two fairleads (seaward and leeward)")
    n_out = _steps(duration, dt, "duration")
    per_out = _steps(dt, layout.substep, "sampling interval")
    n_warm = _steps(layout.warmup, layout.substep, "warmup") if layout.warmup else 0
    h = layout.substep
    n_steps = n_warm + n_out * per_out

    components = synthesize_components(cond)
    hydro = HydroCoefficients.for_box(body, layout.zeta_heave, layout.zeta_pitch, layout.surge_decay)
    offsets = fairlead_offsets(body)
    rest = body.with_state(np.zeros(3), np.zeros(3))
    fl_pos, _ = fairlead_kinematics(rest, offsets)
    lines = [
        (spec, initial_shape(spec, [ax, spec.z_bot], fl_pos[j]))
        for j, (spec, ax) in enumerate(zip(moorings, layout.anchor_x))
    ]
    excite = WaveExcitation(components, rest, cond.depth, ramp=layout.ramp)
    # excitation at half-substep spacing; zero during the still-water warmup
    forces = np.zeros((2 * n_steps + 1, 3))
    forces[2 * n_warm:] = excite.series_uniform(0.0, 0.5 * h, 2 * (n_steps - n_warm) + 1)

    res = run_cosim(rest, hydro, lines, offsets, forces, h, n_steps)

    # output rows whose substeps all completed (everything, on success)
    after_start = res.steps - n_warm
    done_out = n_out + 1 if res.ok else (after_start // per_out + 1 if after_start >= 0 else 0)
    history = BodyHistory(-n_warm * h, h, res.body_vel[: res.steps + 1])
    times = np.arange(done_out) * dt
    motions = res.body_pos[n_warm + np.arange(done_out) * per_out]
    upstream = [surface_elevation(components, x, times) for x in layout.upstream_x]
    rng = derive_rng(cond.seed, "transmission-noise")
    downstream = [
        downstream_elevation(components, history, tm, x, times, d, rng)
        for x, d in zip(layout.downstream_x, tm.delays)
    ]
    channels = np.column_stack(upstream + downstream + [motions]).reshape(done_out, 12)
    meta = _metadata(cond, body, moorings, tm, layout, duration, dt, hydro)
    if res.ok:
        return Dataset(times, channels, dataset_stem(cond, body), meta)
    reason = "degenerate mooring geometry" if res.status == DEGENERATE else "non-finite state"
    last_time = after_start * h
    raise InstabilityError(
        f"co-simulation failed ({reason}) after t={last_time:.6g} s with substep {h}",
        last_time=last_time,
        partial=Dataset(times, channels, dataset_stem(cond, body), meta),
    )


def _metadata(cond, body, moorings, tm, layout, duration, dt, hydro) -> dict:
    meta = {"duration": duration, "dt": dt}
    for k, v in asdict(cond).items():
        meta[f"wave.{k}"] = v
    for k in ("width", "height", "density", "rho_w", "x0"):
        meta[f"body.{k}"] = getattr(body, k)
    meta["body.rw"] = body.rw
    for j, spec in enumerate(moorings):
        for k, v in asdict(spec).items():
            meta[f"mooring{j}.{k}"] = v
        meta[f"mooring{j}.diameter"] = spec.diameter
    for k, v in asdict(tm).items():
        meta[f"transmission.{k}"] = ",".join(map(str, v)) if isinstance(v, tuple) else v
    for k, v in asdict(layout).items():
        meta[f"layout.{k}"] = ",".join(map(str, v)) if isinstance(v, tuple) else v
    for k, v in asdict(hydro).items():
        meta[f"hydro.{k}"] = ",".join(f"{float(x):.9g}" for x in v)
    meta["synthetic"] = "true"
    return {k: (f"{v:.9g}" if isinstance(v, float) else str(v)) for k, v in meta.items()}
