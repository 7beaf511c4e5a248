"""Rigid box floating body with three degrees of freedom (surge, heave, pitch).

Newton/Euler equations per unit span with a linear parametric stand-in for
the fluid: Froude-Krylov excitation from the incident field, linear
radiation damping, hydrostatic restoring, plus fairlead reactions.
Pitch is positive counter-clockwise in the x-z plane (z up).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import InstabilityError
from .mooring import rk2_step
from .waves import G, WaveComponents


@dataclass
class FloatBody:
    width: float = 0.5
    height: float = 0.2
    density: float = 500.0
    rho_w: float = 1000.0
    x0: float = 0.0
    # surge, heave, pitch displacement and their rates
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("body dimensions must be positive")
        if not 0 < self.rw < 1:
            raise ValueError(f"relative density {self.rw} must lie in (0, 1) for a floating body")

    @property
    def rw(self) -> float:
        return self.density / self.rho_w

    @property
    def draft(self) -> float:
        return self.rw * self.height

    @property
    def mass(self) -> float:
        return self.density * self.width * self.height

    @property
    def inertia(self) -> float:
        return self.mass * (self.width**2 + self.height**2) / 12.0

    @property
    def center(self) -> np.ndarray:
        """Rest position of the mass centre (still water level at z=0)."""
        return np.array([self.x0, 0.5 * self.height - self.draft])

    @property
    def R0(self) -> np.ndarray:
        return self.center + self.pos[:2]

    @classmethod
    def from_rw(cls, rw: float, **kw) -> "FloatBody":
        """Box whose draft is ``rw`` times its height (so density = rw * rho_w)."""
        rho_w = kw.pop("rho_w", 1000.0)
        return cls(density=rw * rho_w, rho_w=rho_w, **kw)

    def with_state(self, pos, vel) -> "FloatBody":
        return replace(self, pos=np.asarray(pos, dtype=float), vel=np.asarray(vel, dtype=float))


@dataclass(frozen=True)
class HydroCoefficients:
    """Diagonal linear coefficients ordered (surge, heave, pitch)."""

    added_mass: tuple = (0.0, 0.0, 0.0)
    damping: tuple = (0.0, 0.0, 0.0)
    restoring: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def for_box(
        cls,
        body: FloatBody,
        zeta_heave: float = 0.4,
        zeta_pitch: float = 0.5,
        surge_decay: float = 0.2,
        surge_stiffness: float = 0.0,
    ) -> "HydroCoefficients":
        """Rough closed forms for a rectangular box.

        Added mass from half-cylinder/strip estimates, restoring from the
        waterplane and metacentric height, damping as a fraction of critical
        (surge: a decay rate in 1/s since it has no hydrostatic stiffness).
        """
        rho, w, T = body.rho_w, body.width, body.draft
        a11 = 0.5 * rho * np.pi * T * T
        a33 = rho * np.pi * w * w / 8.0
        a55 = rho * np.pi * (0.5 * w) ** 4 / 8.0
        vol = w * T
        gm = 0.5 * T + w * w / (12.0 * T) - 0.5 * body.height
        k33 = rho * G * w
        k55 = rho * G * vol * gm
        m = np.array([body.mass + a11, body.mass + a33, body.inertia + a55])
        b11 = surge_decay * m[0]
        b33 = 2.0 * zeta_heave * np.sqrt(k33 * m[1])
        b55 = 2.0 * zeta_pitch * np.sqrt(max(k55, 0.0) * m[2])
        return cls(
            added_mass=(a11, a33, a55),
            damping=(b11, b33, b55),
            restoring=(surge_stiffness, k33, k55),
        )

    def mass_matrix(self, body: FloatBody) -> np.ndarray:
        return np.array([body.mass, body.mass, body.inertia]) + np.asarray(self.added_mass)

    def natural_frequency(self, body: FloatBody) -> np.ndarray:
        return np.sqrt(np.asarray(self.restoring) / self.mass_matrix(body))


class WaveExcitation:
    """Froude-Krylov force on the box from linear incident waves.

    Pressure ``rho g a cosh(k(z+h))/cosh(kh)`` is integrated over the bottom
    (heave, pitch) and the two vertical sides (surge).  Each component gets
    a complex gain so that the force at time t is
    ``Re(sum_j gain_j exp(-i w_j t))``.
    """

    def __init__(self, components: WaveComponents, body: FloatBody, depth: float, ramp: float = 0.0):
        a, k, ph = components.amplitude, components.k, components.phase
        rho, w, T, x0 = body.rho_w, body.width, body.draft, body.x0
        self.components = components
        self.ramp = ramp
        base = rho * G * a * np.exp(1j * (k * x0 + ph))
        half = 0.5 * k * w
        bottom = np.cosh(k * (depth - T)) / np.cosh(k * depth)
        sinc = np.sinc(half / np.pi)
        heave = base * bottom * w * sinc
        # sides: cosh profile integrated over the draft; F_x = p(left) - p(right)
        side = (np.sinh(k * depth) - np.sinh(k * (depth - T))) / (k * np.cosh(k * depth))
        surge = base * side * (-2j) * np.sin(half)
        # bottom moment about the centre line: int s cos(ks + psi) ds
        first = 2.0 * (np.sin(half) / k**2 - 0.5 * w * np.cos(half) / k)
        pitch = base * bottom * 1j * first
        self.gains = np.stack([surge, heave, pitch], axis=1)

    def _envelope(self, t):
        if self.ramp <= 0:
            return np.ones_like(np.asarray(t, dtype=float))
        s = np.clip(np.asarray(t, dtype=float) / self.ramp, 0.0, 1.0)
        return 0.5 - 0.5 * np.cos(np.pi * s)

    def __call__(self, t: float) -> np.ndarray:
        ph = np.exp(-1j * self.components.omega * t)
        return (ph @ self.gains).real * self._envelope(t)

    def series(self, t) -> np.ndarray:
        """Forces at many times, shape ``[len(t), 3]``."""
        from .waves import phasor_series

        t = np.atleast_1d(np.asarray(t, dtype=float))
        return phasor_series(self.components, self.gains, t) * self._envelope(t)[:, None]

    def series_uniform(self, t0: float, step: float, n: int) -> np.ndarray:
        from .waves import phasor_series_uniform

        t = t0 + step * np.arange(n)
        return phasor_series_uniform(self.components, self.gains, t0, step, n) * self._envelope(t)[:, None]


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def fairlead_offsets(body: FloatBody) -> np.ndarray:
    """Body-frame offsets of the seaward and leeward bottom corners from the mass centre."""
    zc = -0.5 * body.height
    return np.array([[-0.5 * body.width, zc], [0.5 * body.width, zc]])


def fairlead_kinematics(body: FloatBody, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rigid-body point velocity u = V + Omega x (r - R0) at each attachment."""
    rel = np.asarray(offsets) @ rotation(body.pos[2]).T
    pos = body.R0 + rel
    omega = body.vel[2]
    vel = body.vel[:2] + omega * np.stack([-rel[..., 1], rel[..., 0]], axis=-1)
    return pos, vel


def generalized_force(body: FloatBody, offsets: np.ndarray, forces: np.ndarray) -> np.ndarray:
    """Surge/heave force and pitch moment from point forces at the attachments."""
    rel = np.asarray(offsets) @ rotation(body.pos[2]).T
    f = np.asarray(forces)
    moment = rel[..., 0] * f[..., 1] - rel[..., 1] * f[..., 0]
    return np.array([f[..., 0].sum(), f[..., 1].sum(), moment.sum()])


def body_step(
    body: FloatBody,
    forcing: Callable[[float], np.ndarray],
    mooring_load: np.ndarray,
    hydro: HydroCoefficients,
    t: float,
    dt: float,
) -> FloatBody:
    """One RK2 step of (M + A) xdd = F_exc(t) - B xd - K x + mooring_load.

    ``mooring_load`` is a generalised (Fx, Fz, My) held fixed over the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = hydro.mass_matrix(body)
    b = np.asarray(hydro.damping, dtype=float)
    k = np.asarray(hydro.restoring, dtype=float)
    load = np.asarray(mooring_load, dtype=float)

    def rhs(s, y):
        x, v = y[:3], y[3:]
        acc = (forcing(s) - b * v - k * x + load) / m
        return np.concatenate([v, acc])

    y = rk2_step(rhs, t, np.concatenate([body.pos, body.vel]), dt)
    if not np.all(np.isfinite(y)):
        raise InstabilityError(f"body state became non-finite at t={t + dt:.6g} with dt={dt}", last_time=t)
    return body.with_state(y[:3], y[3:])


def mechanical_energy(body: FloatBody, hydro: HydroCoefficients) -> float:
    m = hydro.mass_matrix(body)
    k = np.asarray(hydro.restoring)
    return float(0.5 * np.sum(m * body.vel**2) + 0.5 * np.sum(k * body.pos**2))
