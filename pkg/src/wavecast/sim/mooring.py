"""Lumped-mass mooring line in the x-z plane.

Node 0 is the anchor, node ``n_segments`` the fairlead.  Positions may carry
leading axes (several lines stepped together); every routine works on the
last two axes ``[n_nodes, 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ..errors import InstabilityError

G = 9.81


class DegenerateGeometryError(ValueError):
    """Two adjacent nodes coincide, so the segment direction is undefined."""


@dataclass(frozen=True)
class MooringLineSpec:
    length: float = 1.58
    mass_per_len: float = 0.06
    rho_m: float = 7850.0
    # Pa; soft enough for an explicit 1 ms step at 20 segments
    elastic_modulus: float = 4.0e6
    c_int: float = 7.0e3
    c_dt: float = 0.5
    c_dn: float = 1.2
    c_at: float = 0.5
    c_an: float = 1.0
    k_b: float = 1.0e6
    c_b: float = 5.0e3
    z_bot: float = -0.8
    n_segments: int = 20
    rho_w: float = 1000.0
    g: float = G

    def __post_init__(self):
        for name in ("length", "mass_per_len", "rho_m", "rho_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("elastic_modulus", "c_int", "c_dt", "c_dn", "c_at", "c_an", "k_b", "c_b", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_segments < 2:
            raise ValueError("a line needs at least two segments")

    @property
    def diameter(self) -> float:
        return float(np.sqrt(4.0 * self.mass_per_len / (np.pi * self.rho_m)))

    @property
    def area(self) -> float:
        return 0.25 * np.pi * self.diameter**2

    @property
    def seg_len(self) -> float:
        return self.length / self.n_segments

    @property
    def node_mass(self) -> float:
        return self.mass_per_len * self.seg_len

    @property
    def submerged_weight_per_len(self) -> float:
        return self.area * (self.rho_m - self.rho_w) * self.g

    def with_diameter(self, d: float) -> "MooringLineSpec":
        """Same line mass, different nominal diameter (density follows)."""
        return replace(self, rho_m=self.mass_per_len / (0.25 * np.pi * d * d))


@dataclass
class MooringState:
    r: np.ndarray
    r_dot: np.ndarray
    anchor_index: int = 0
    fairlead_index: int = -1

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.r_dot = np.asarray(self.r_dot, dtype=float)
        if self.fairlead_index < 0:
            self.fairlead_index += self.r.shape[-2]

    def copy(self) -> "MooringState":
        return MooringState(self.r.copy(), self.r_dot.copy(), self.anchor_index, self.fairlead_index)

    @property
    def fairlead(self) -> np.ndarray:
        return self.r[..., self.fairlead_index, :]

    @property
    def anchor(self) -> np.ndarray:
        return self.r[..., self.anchor_index, :]


@dataclass
class MooringForces:
    """Per-node and per-segment force terms of the node equation of motion.

    Segment arrays have ``n_segments`` rows (segment i joins nodes i, i+1);
    node arrays have ``n_segments + 1`` rows.  ``net`` is the full right-hand
    side; ``mass`` is the 2x2 node mass matrix (lumped mass plus added mass).
    """

    weight: np.ndarray
    tension: np.ndarray
    damping: np.ndarray
    drag_p: np.ndarray
    drag_q: np.ndarray
    seabed: np.ndarray
    added_mass: np.ndarray
    strain: np.ndarray
    strain_rate: np.ndarray
    tangent: np.ndarray
    net: np.ndarray = field(repr=False)
    positions: np.ndarray | None = field(default=None, repr=False)

    @property
    def tension_magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.tension, axis=-1)

    def internal(self) -> np.ndarray:
        """Tension + internal damping force on every node (ends included)."""
        seg = self.tension + self.damping
        out = np.zeros(seg.shape[:-2] + (seg.shape[-2] + 1, 2))
        out[..., :-1, :] += seg
        out[..., 1:, :] -= seg
        return out

    def fairlead_force(self) -> np.ndarray:
        """Force the line exerts on whatever holds the fairlead."""
        return -(self.tension[..., -1, :] + self.damping[..., -1, :])


def _rowdot(a, b):
    return np.einsum("...i,...i->...", a, b)


def mooring_forces(state: MooringState, spec: MooringLineSpec) -> MooringForces:
    r, v = state.r, state.r_dot
    n_nodes = r.shape[-2]
    d = spec.diameter
    l0 = spec.seg_len
    area = spec.area

    seg = r[..., 1:, :] - r[..., :-1, :]
    seg_len = np.linalg.norm(seg, axis=-1)
    if np.any(seg_len <= 1e-12 * l0):
        bad = np.argwhere(seg_len <= 1e-12 * l0)[0]
        raise DegenerateGeometryError(f"nodes {bad[-1]} and {bad[-1] + 1} coincide")
    unit = seg / seg_len[..., None]

    strain = (seg_len - l0) / l0
    dv = v[..., 1:, :] - v[..., :-1, :]
    strain_rate = _rowdot(seg, dv) / (l0 * seg_len)
    t_mag = spec.elastic_modulus * area * np.maximum(strain, 0.0)
    tension = t_mag[..., None] * unit
    damping = (spec.c_int * area * strain_rate)[..., None] * unit

    # per-node tangent: direction to the next node (the fairlead reuses its
    # incoming segment)
    tangent = np.concatenate([unit, unit[..., -1:, :]], axis=-2)

    w_seg = 0.25 * np.pi * d * d * l0 * (spec.rho_m - spec.rho_w) * spec.g
    weight = np.zeros(r.shape)
    weight[..., :, 1] = -w_seg
    weight[..., 0, 1] = weight[..., -1, 1] = -0.5 * w_seg

    vt = _rowdot(v, tangent)
    # tangential drag opposes the tangential velocity
    drag_q = (0.5 * spec.rho_w * spec.c_dt * l0 * d * np.abs(vt) * (-vt))[..., None] * tangent
    vn = vt[..., None] * tangent - v
    drag_p = 0.5 * spec.rho_w * spec.c_dn * l0 * d * np.linalg.norm(vn, axis=-1)[..., None] * vn

    z = r[..., 1]
    contact = z <= spec.z_bot
    seabed = np.zeros(r.shape)
    seabed[..., 1] = np.where(contact, l0 * d * ((spec.z_bot - z) * spec.k_b - v[..., 1] * spec.c_b), 0.0)

    vol = area * l0
    eet = tangent[..., :, None] * tangent[..., None, :]
    eye = np.eye(2)
    added = spec.rho_w * vol * (spec.c_an * (eye - eet) + spec.c_at * eet)

    net = weight + drag_p + drag_q + seabed
    net[..., :-1, :] += tension[..., :, :] + damping
    net[..., 1:, :] -= tension + damping
    return MooringForces(
        weight=weight,
        tension=tension,
        damping=damping,
        drag_p=drag_p,
        drag_q=drag_q,
        seabed=seabed,
        added_mass=added,
        strain=strain,
        strain_rate=strain_rate,
        tangent=tangent,
        net=net,
        positions=r,
    )


def node_accelerations(forces: MooringForces, spec: MooringLineSpec) -> np.ndarray:
    """Solve (m I + a_i) r_ddot = F at every node.

    The node mass matrix is alpha I + beta e e^T, whose inverse is
    (I - beta/(alpha+beta) e e^T) / alpha.
    """
    alpha, beta = _mass_coeffs(spec)
    f = forces.net
    e = forces.tangent
    return (f - (beta / (alpha + beta)) * _rowdot(e, f)[..., None] * e) / alpha


def _mass_coeffs(spec: MooringLineSpec) -> tuple[float, float]:
    vol = spec.area * spec.seg_len
    alpha = spec.node_mass + spec.rho_w * vol * spec.c_an
    beta = spec.rho_w * vol * (spec.c_at - spec.c_an)
    return alpha, beta


class _Kernel:
    """Accelerations only, on separate x/z component arrays.

    Same physics as :func:`mooring_forces` + :func:`node_accelerations`
    without building the breakdown; this is the inner loop of a run.
    """

    def __init__(self, spec: MooringLineSpec):
        d, l0, area = spec.diameter, spec.seg_len, spec.area
        self.l0 = l0
        self.ea = spec.elastic_modulus * area
        self.ca = spec.c_int * area
        self.w_seg = 0.25 * np.pi * d * d * l0 * (spec.rho_m - spec.rho_w) * spec.g
        self.kq = 0.5 * spec.rho_w * spec.c_dt * l0 * d
        self.kp = 0.5 * spec.rho_w * spec.c_dn * l0 * d
        self.kb = l0 * d * spec.k_b
        self.cb = l0 * d * spec.c_b
        self.z_bot = spec.z_bot
        alpha, beta = _mass_coeffs(spec)
        self.inv_alpha = 1.0 / alpha
        self.shrink = beta / (alpha + beta)

    def __call__(self, rx, rz, vx, vz):
        sx = rx[..., 1:] - rx[..., :-1]
        sz = rz[..., 1:] - rz[..., :-1]
        ln = np.sqrt(sx * sx + sz * sz)
        if np.any(ln <= 1e-12 * self.l0):
            raise DegenerateGeometryError("adjacent mooring nodes coincide")
        ux, uz = sx / ln, sz / ln
        rate = (sx * (vx[..., 1:] - vx[..., :-1]) + sz * (vz[..., 1:] - vz[..., :-1])) / (self.l0 * ln)
        mag = self.ea * np.maximum(ln - self.l0, 0.0) / self.l0 + self.ca * rate
        tx, tz = mag * ux, mag * uz

        ex = np.concatenate([ux, ux[..., -1:]], axis=-1)
        ez = np.concatenate([uz, uz[..., -1:]], axis=-1)
        vt = vx * ex + vz * ez
        nx, nz = vt * ex - vx, vt * ez - vz
        dq = -self.kq * np.abs(vt) * vt
        dp = self.kp * np.sqrt(nx * nx + nz * nz)
        fx = dq * ex + dp * nx
        fz = dq * ez + dp * nz - self.w_seg
        fx[..., :-1] += tx
        fx[..., 1:] -= tx
        fz[..., :-1] += tz
        fz[..., 1:] -= tz
        pen = self.z_bot - rz
        fz += np.where(pen >= 0.0, self.kb * pen - self.cb * vz, 0.0)

        proj = self.shrink * (ex * fx + ez * fz)
        return (fx - proj * ex) * self.inv_alpha, (fz - proj * ez) * self.inv_alpha


def rk2_step(f: Callable, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Explicit midpoint rule: y + dt f(t + dt/2, y + dt/2 f(t, y))."""
    k1 = f(t, y)
    return y + dt * f(t + 0.5 * dt, y + 0.5 * dt * k1)


def mooring_step(
    state: MooringState,
    spec: MooringLineSpec,
    fairlead_pos_vel,
    dt: float,
    check: Callable[[MooringForces], None] | None = None,
) -> MooringState:
    """Advance interior nodes one RK2 step.

    ``fairlead_pos_vel`` is the prescribed (position, velocity) at the end
    of the step; in between the fairlead moves on the straight line from its
    current kinematics.  The anchor stays pinned.  ``check`` (if given) sees
    the force breakdown of every stage.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    fi, ai = state.fairlead_index, state.anchor_index
    p0, v0 = state.r[..., fi, :].copy(), state.r_dot[..., fi, :].copy()
    p1 = np.asarray(fairlead_pos_vel[0], dtype=float)
    v1 = np.asarray(fairlead_pos_vel[1], dtype=float)
    anchor = state.r[..., ai, :].copy()
    kernel = _kernel_for(spec)
    fl_acc = (v1 - v0) / dt

    def rhs(s, y):
        # y: [4, ..., n_nodes] = rx, rz, vx, vz
        frac = s / dt
        y = y.copy()
        y[0:2, ..., fi] = np.moveaxis(p0 + frac * (p1 - p0), -1, 0)
        y[2:4, ..., fi] = np.moveaxis(v0 + frac * (v1 - v0), -1, 0)
        y[0:2, ..., ai] = np.moveaxis(anchor, -1, 0)
        y[2:4, ..., ai] = 0.0
        if check is not None:
            r = np.stack([y[0], y[1]], axis=-1)
            v = np.stack([y[2], y[3]], axis=-1)
            check(mooring_forces(MooringState(r, v, ai, fi), spec))
        ax, az = kernel(y[0], y[1], y[2], y[3])
        ax[..., fi], az[..., fi] = fl_acc[..., 0], fl_acc[..., 1]
        ax[..., ai] = az[..., ai] = 0.0
        return np.stack([y[2], y[3], ax, az])

    y0 = np.stack([state.r[..., 0], state.r[..., 1], state.r_dot[..., 0], state.r_dot[..., 1]])
    # overflow on a blow-up is reported below as an instability
    with np.errstate(over="ignore", invalid="ignore"):
        y = rk2_step(rhs, 0.0, y0, dt)
    r = np.stack([y[0], y[1]], axis=-1)
    v = np.stack([y[2], y[3]], axis=-1)
    r[..., fi, :] = p1
    v[..., fi, :] = v1
    r[..., ai, :] = anchor
    v[..., ai, :] = 0.0
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
        bad = np.argwhere(~np.isfinite(r).all(axis=-1) | ~np.isfinite(v).all(axis=-1))[0]
        raise InstabilityError(f"mooring node {bad[-1]} became non-finite with dt={dt}")
    return MooringState(r, v, ai, fi)


_KERNELS: dict[MooringLineSpec, _Kernel] = {}


def _kernel_for(spec: MooringLineSpec) -> _Kernel:
    k = _KERNELS.get(spec)
    if k is None:
        k = _KERNELS[spec] = _Kernel(spec)
    return k


def initial_shape(spec: MooringLineSpec, anchor, fairlead) -> MooringState:
    """Slack line: a run along the seabed, then straight up to the fairlead.

    Nodes sit at equal arc length.  A taut straight line is used when the
    ends are already at least one line length apart.
    """
    anchor = np.asarray(anchor, dtype=float)
    fairlead = np.asarray(fairlead, dtype=float)
    n = spec.n_segments
    span = fairlead - anchor
    dist = float(np.linalg.norm(span))
    s = np.linspace(0.0, spec.length, n + 1)
    if dist >= spec.length or abs(span[0]) < 1e-9:
        pts = anchor + np.outer(s / spec.length, span)
    else:
        dx, dz = abs(span[0]), span[1]
        sign = np.sign(span[0])
        # laid length b: b + sqrt((dx-b)^2 + dz^2) = length
        fn = lambda b: b + np.hypot(dx - b, dz) - spec.length
        b = brentq(fn, 0.0, dx) if fn(0.0) < 0 < fn(dx) else 0.0
        riser = spec.length - b
        pts = np.empty((n + 1, 2))
        for i, si in enumerate(s):
            if si <= b:
                pts[i] = anchor + np.array([sign * si, 0.0])
            else:
                frac = (si - b) / riser
                start = anchor + np.array([sign * b, 0.0])
                pts[i] = start + frac * (fairlead - start)
    return MooringState(pts, np.zeros_like(pts), 0, n)


def settle(
    state: MooringState,
    spec: MooringLineSpec,
    duration: float,
    dt: float = 1e-3,
    check: Callable[[MooringForces], None] | None = None,
) -> MooringState:
    """Step with both ends held fixed until ``duration`` has elapsed."""
    fixed = (state.fairlead.copy(), np.zeros_like(state.fairlead))
    n = int(round(duration / dt))
    for _ in range(n):
        state = mooring_step(state, spec, fixed, dt, check=check)
    return state
