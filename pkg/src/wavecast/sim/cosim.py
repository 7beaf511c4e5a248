"""Compiled body/mooring co-simulation loop.

Same arithmetic as repeatedly calling :func:`body.body_step` and
:func:`mooring.mooring_step` (see ``reference_cosim``), but fused into one
numba kernel because a 500 s run is half a million substeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .body import FloatBody, HydroCoefficients, body_step, fairlead_kinematics, generalized_force
from .mooring import MooringLineSpec, MooringState, _mass_coeffs, mooring_forces, mooring_step

# status codes returned by the kernel
OK, NONFINITE, DEGENERATE = 0, 1, 2


def line_constants(spec: MooringLineSpec) -> np.ndarray:
    d, l0, area = spec.diameter, spec.seg_len, spec.area
    alpha, beta = _mass_coeffs(spec)
    return np.array([
        l0,
        spec.elastic_modulus * area,
        spec.c_int * area,
        0.25 * np.pi * d * d * l0 * (spec.rho_m - spec.rho_w) * spec.g,
        0.5 * spec.rho_w * spec.c_dt * l0 * d,
        0.5 * spec.rho_w * spec.c_dn * l0 * d,
        l0 * d * spec.k_b,
        l0 * d * spec.c_b,
        spec.z_bot,
        1.0 / alpha,
        beta / (alpha + beta),
    ])


@njit(cache=True)
def _segment_force(rx, rz, vx, vz, i, c):
    """Tension + internal damping along segment i (node i -> i+1), plus its unit vector."""
    l0, ea, ca = c[0], c[1], c[2]
    sx = rx[i + 1] - rx[i]
    sz = rz[i + 1] - rz[i]
    ln = np.sqrt(sx * sx + sz * sz)
    ux = sx / ln
    uz = sz / ln
    rate = (sx * (vx[i + 1] - vx[i]) + sz * (vz[i + 1] - vz[i])) / (l0 * ln)
    strain = (ln - l0) / l0
    mag = ea * max(strain, 0.0) + ca * rate
    return mag * ux, mag * uz, ux, uz, ln


@njit(cache=True)
def _interior_acc(rx, rz, vx, vz, c, ax, az):
    n = rx.shape[0]
    l0, w_seg, kq, kp, kb, cb, z_bot, inv_alpha, shrink = c[0], c[3], c[4], c[5], c[6], c[7], c[8], c[9], c[10]
    px, pz, _, _, ln = _segment_force(rx, rz, vx, vz, 0, c)
    if not ln > 1e-12 * l0:
        return DEGENERATE
    for i in range(1, n - 1):
        tx, tz, ex, ez, ln = _segment_force(rx, rz, vx, vz, i, c)
        if not ln > 1e-12 * l0:
            return DEGENERATE
        vt = vx[i] * ex + vz[i] * ez
        nx = vt * ex - vx[i]
        nz = vt * ez - vz[i]
        dq = -kq * abs(vt) * vt
        dp = kp * np.sqrt(nx * nx + nz * nz)
        fx = dq * ex + dp * nx + tx - px
        fz = dq * ez + dp * nz - w_seg + tz - pz
        pen = z_bot - rz[i]
        if pen >= 0.0:
            fz += kb * pen - cb * vz[i]
        proj = shrink * (ex * fx + ez * fz)
        ax[i] = (fx - proj * ex) * inv_alpha
        az[i] = (fz - proj * ez) * inv_alpha
        px, pz = tx, tz
    return OK


@njit(cache=True)
def _line_step(rx, rz, vx, vz, p1x, p1z, v1x, v1z, dt, c, work):
    """Midpoint RK2 for one line; fairlead interpolated linearly to (p1, v1)."""
    n = rx.shape[0]
    ax1, az1, ax2, az2 = work[0], work[1], work[2], work[3]
    mx, mz, mvx, mvz = work[4], work[5], work[6], work[7]
    f = n - 1
    status = _interior_acc(rx, rz, vx, vz, c, ax1, az1)
    if status != OK:
        return status
    h = 0.5 * dt
    for i in range(1, n - 1):
        mx[i] = rx[i] + h * vx[i]
        mz[i] = rz[i] + h * vz[i]
        mvx[i] = vx[i] + h * ax1[i]
        mvz[i] = vz[i] + h * az1[i]
    mx[0], mz[0], mvx[0], mvz[0] = rx[0], rz[0], 0.0, 0.0
    mx[f] = rx[f] + 0.5 * (p1x - rx[f])
    mz[f] = rz[f] + 0.5 * (p1z - rz[f])
    mvx[f] = vx[f] + 0.5 * (v1x - vx[f])
    mvz[f] = vz[f] + 0.5 * (v1z - vz[f])
    status = _interior_acc(mx, mz, mvx, mvz, c, ax2, az2)
    if status != OK:
        return status
    for i in range(1, n - 1):
        rx[i] += dt * mvx[i]
        rz[i] += dt * mvz[i]
        vx[i] += dt * ax2[i]
        vz[i] += dt * az2[i]
    rx[f], rz[f], vx[f], vz[f] = p1x, p1z, v1x, v1z
    vx[0] = vz[0] = 0.0
    for i in range(n):
        if not (np.isfinite(rx[i]) and np.isfinite(rz[i]) and np.isfinite(vx[i]) and np.isfinite(vz[i])):
            return NONFINITE
    return OK


@njit(cache=True)
def _run(rx, rz, vx, vz, consts, offsets, center, mass, damp, stiff, pos, vel, exc, dt, n_steps, hist_pos, hist_vel):
    """Advance body and lines ``n_steps`` substeps in place.

    ``exc`` holds excitation forces at half-substep spacing (2 n_steps + 1
    rows).  Body state is written to ``hist_*`` after every substep.
    Returns (status, steps completed).
    """
    n_lines, n = rx.shape
    work = np.empty((8, n))
    hist_pos[0] = pos
    hist_vel[0] = vel
    load = np.zeros(3)
    y = np.empty(6)
    k1 = np.empty(6)
    for s in range(n_steps):
        # fairlead reactions at the start of the step
        c, sn = np.cos(pos[2]), np.sin(pos[2])
        load[:] = 0.0
        for j in range(n_lines):
            cj = consts[j]
            tx, tz, _, _, ln = _segment_force(rx[j], rz[j], vx[j], vz[j], n - 2, cj)
            if not ln > 1e-12 * cj[0]:
                return DEGENERATE, s
            fx, fz = -tx, -tz
            relx = c * offsets[j, 0] - sn * offsets[j, 1]
            relz = sn * offsets[j, 0] + c * offsets[j, 1]
            load[0] += fx
            load[1] += fz
            load[2] += relx * fz - relz * fx
        # body: midpoint rule with the load frozen
        for d in range(3):
            k1[d] = vel[d]
            k1[3 + d] = (exc[2 * s, d] - damp[d] * vel[d] - stiff[d] * pos[d] + load[d]) / mass[d]
        for d in range(3):
            y[d] = pos[d] + 0.5 * dt * k1[d]
            y[3 + d] = vel[d] + 0.5 * dt * k1[3 + d]
        for d in range(3):
            acc = (exc[2 * s + 1, d] - damp[d] * y[3 + d] - stiff[d] * y[d] + load[d]) / mass[d]
            pos[d] = pos[d] + dt * y[3 + d]
            vel[d] = vel[d] + dt * acc
        for d in range(3):
            if not (np.isfinite(pos[d]) and np.isfinite(vel[d])):
                return NONFINITE, s
        hist_pos[s + 1] = pos
        hist_vel[s + 1] = vel
        # new fairlead kinematics, then the lines
        c, sn = np.cos(pos[2]), np.sin(pos[2])
        for j in range(n_lines):
            relx = c * offsets[j, 0] - sn * offsets[j, 1]
            relz = sn * offsets[j, 0] + c * offsets[j, 1]
            p1x = center[0] + pos[0] + relx
            p1z = center[1] + pos[1] + relz
            v1x = vel[0] - vel[2] * relz
            v1z = vel[1] + vel[2] * relx
            status = _line_step(rx[j], rz[j], vx[j], vz[j], p1x, p1z, v1x, v1z, dt, consts[j], work)
            if status != OK:
                return status, s
    return OK, n_steps


@dataclass
class CosimResult:
    status: int
    steps: int
    body_pos: np.ndarray
    body_vel: np.ndarray
    lines: list

    @property
    def ok(self) -> bool:
        return self.status == OK


def run_cosim(
    body: FloatBody,
    hydro: HydroCoefficients,
    lines: list[tuple[MooringLineSpec, MooringState]],
    offsets: np.ndarray,
    excitation: np.ndarray,
    dt: float,
    n_steps: int,
) -> CosimResult:
    """Run the fused loop; ``excitation`` has ``2 n_steps + 1`` rows at dt/2 spacing."""
    if excitation.shape != (2 * n_steps + 1, 3):
        raise ValueError(f"excitation must have shape {(2 * n_steps + 1, 3)}, got {excitation.shape}")
    n_nodes = {st.r.shape[-2] for _, st in lines}
    if len(n_nodes) != 1:
        raise ValueError("all lines must have the same node count")
    rx = np.ascontiguousarray([st.r[:, 0] for _, st in lines])
    rz = np.ascontiguousarray([st.r[:, 1] for _, st in lines])
    vx = np.ascontiguousarray([st.r_dot[:, 0] for _, st in lines])
    vz = np.ascontiguousarray([st.r_dot[:, 1] for _, st in lines])
    consts = np.array([line_constants(spec) for spec, _ in lines])
    pos, vel = body.pos.copy(), body.vel.copy()
    hist_pos = np.full((n_steps + 1, 3), np.nan)
    hist_vel = np.full((n_steps + 1, 3), np.nan)
    status, steps = _run(
        rx, rz, vx, vz, consts, np.ascontiguousarray(offsets, dtype=float), body.center,
        hydro.mass_matrix(body), np.asarray(hydro.damping, dtype=float),
        np.asarray(hydro.restoring, dtype=float), pos, vel,
        np.ascontiguousarray(excitation, dtype=float), float(dt), int(n_steps), hist_pos, hist_vel,
    )
    out_lines = [
        MooringState(np.stack([rx[j], rz[j]], -1), np.stack([vx[j], vz[j]], -1), 0, rx.shape[1] - 1)
        for j in range(len(lines))
    ]
    return CosimResult(int(status), int(steps), hist_pos, hist_vel, out_lines)


def reference_cosim(body, hydro, lines, offsets, forcing, dt, n_steps):
    """Plain-python version of :func:`run_cosim`, built from the public step functions."""
    states = [st for _, st in lines]
    specs = [sp for sp, _ in lines]
    pos = [body.pos.copy()]
    vel = [body.vel.copy()]
    for s in range(n_steps):
        t = s * dt
        f_lines = np.array([mooring_forces(st, sp).fairlead_force() for st, sp in zip(states, specs)])
        load = generalized_force(body, offsets, f_lines)
        body = body_step(body, forcing, load, hydro, t, dt)
        fl_pos, fl_vel = fairlead_kinematics(body, offsets)
        states = [
            mooring_step(st, sp, (fl_pos[j], fl_vel[j]), dt) for j, (st, sp) in enumerate(zip(states, specs))
        ]
        pos.append(body.pos.copy())
        vel.append(body.vel.copy())
    return np.array(pos), np.array(vel), states
