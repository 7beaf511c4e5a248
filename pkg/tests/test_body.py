import math

import numpy as np
import pytest

from wavecast.sim.body import (
    FloatBody,
    HydroCoefficients,
    WaveExcitation,
    body_step,
    fairlead_kinematics,
    fairlead_offsets,
    generalized_force,
    mechanical_energy,
)
from wavecast.sim.cosim import reference_cosim, run_cosim
from wavecast.sim.mooring import MooringLineSpec, initial_shape
from wavecast.sim.waves import G, WaveComponents, WaveCondition, synthesize_components

CALM = lambda t: np.zeros(3)


def test_box_properties():
    body = FloatBody()
    assert body.mass == pytest.approx(50.0)
    assert body.inertia == pytest.approx(50.0 * (0.25 + 0.04) / 12)
    assert body.rw == 0.5 and body.draft == pytest.approx(0.1)
    assert np.allclose(body.center, [0.0, 0.0])
    deep = FloatBody.from_rw(0.8)
    assert deep.density == pytest.approx(800) and deep.draft == pytest.approx(0.16)
    with pytest.raises(ValueError):
        FloatBody(density=1200.0)


def test_hydrostatic_heave_stiffness():
    body = FloatBody()
    hydro = HydroCoefficients.for_box(body)
    assert hydro.restoring[1] == pytest.approx(1000 * G * 0.5)
    assert hydro.restoring[2] > 0


def test_undamped_heave_is_harmonic():
    body = FloatBody().with_state([0, 0.01, 0], [0, 0, 0])
    hydro = HydroCoefficients.for_box(body, zeta_heave=0.0, zeta_pitch=0.0, surge_decay=0.0)
    omega = hydro.natural_frequency(body)[1]
    assert omega == pytest.approx(math.sqrt(hydro.restoring[1] / (body.mass + hydro.added_mass[1])))
    dt = 1e-3
    n = int(round(10 * 2 * math.pi / omega / dt))
    z = np.empty(n + 1)
    z[0] = body.pos[1]
    b = body
    for s in range(n):
        b = body_step(b, CALM, np.zeros(3), hydro, s * dt, dt)
        z[s + 1] = b.pos[1]
    t = np.arange(n + 1) * dt
    assert np.max(np.abs(z - 0.01 * np.cos(omega * t))) < 0.005 * 0.01
    last = z[-int(2 * math.pi / omega / dt):]
    assert np.max(np.abs(last)) == pytest.approx(0.01, rel=0.005)


def test_damped_energy_never_increases():
    body = FloatBody().with_state([0.01, 0.02, 0.05], [0.05, -0.02, 0.1])
    hydro = HydroCoefficients.for_box(body)
    energy = [mechanical_energy(body, hydro)]
    for s in range(4000):
        body = body_step(body, CALM, np.zeros(3), hydro, s * 1e-3, 1e-3)
        energy.append(mechanical_energy(body, hydro))
    assert np.all(np.diff(energy) <= 0)
    assert energy[-1] < 0.05 * energy[0]


def test_pure_heave_forcing_keeps_symmetric_moored_body_level():
    rest = FloatBody()
    offsets = fairlead_offsets(rest)
    fl, _ = fairlead_kinematics(rest, offsets)
    spec = MooringLineSpec()
    lines = [(spec, initial_shape(spec, [-1.45, -0.8], fl[0])), (spec, initial_shape(spec, [1.45, -0.8], fl[1]))]
    n = 3000
    t = np.arange(2 * n + 1) * 0.5e-3
    exc = np.zeros((2 * n + 1, 3))
    exc[:, 1] = 20 * np.sin(4 * t)
    res = run_cosim(rest, HydroCoefficients.for_box(rest), lines, offsets, exc, 1e-3, n)
    assert res.ok
    assert np.max(np.abs(res.body_pos[:, [0, 2]])) <= 1e-12
    assert np.max(np.abs(res.body_pos[:, 1])) > 1e-3


def test_fused_loop_matches_reference_stepper():
    comp = synthesize_components(WaveCondition(Hs=0.15, Tp=1.5, seed=2))
    rest = FloatBody()
    offsets = fairlead_offsets(rest)
    fl, _ = fairlead_kinematics(rest, offsets)
    spec = MooringLineSpec()
    lines = [(spec, initial_shape(spec, [-1.45, -0.8], fl[0])), (spec, initial_shape(spec, [1.45, -0.8], fl[1]))]
    hydro = HydroCoefficients.for_box(rest)
    excite = WaveExcitation(comp, rest, 0.8, ramp=0.5)
    dt, n = 1e-3, 1500
    fused = run_cosim(rest, hydro, lines, offsets, excite.series_uniform(0.0, 0.5 * dt, 2 * n + 1), dt, n)
    pos, vel, states = reference_cosim(rest, hydro, lines, offsets, excite, dt, n)
    assert fused.ok
    assert np.max(np.abs(fused.body_pos - pos)) < 1e-12
    assert np.max(np.abs(fused.body_vel - vel)) < 1e-10
    for a, b in zip(fused.lines, states):
        assert np.max(np.abs(a.r - b.r)) < 1e-10


def test_fairlead_kinematics_rigid_rotation():
    body = FloatBody().with_state([0.1, -0.02, 0.2], [0.3, 0.1, 0.5])
    offsets = fairlead_offsets(body)
    pos, vel = fairlead_kinematics(body, offsets)
    c, s = math.cos(0.2), math.sin(0.2)
    rel = np.array([[c * o[0] - s * o[1], s * o[0] + c * o[1]] for o in offsets])
    assert np.allclose(pos, body.R0 + rel)
    assert np.allclose(vel, [[0.3 - 0.5 * r[1], 0.1 + 0.5 * r[0]] for r in rel])
    # distances to the mass centre are preserved
    assert np.allclose(np.linalg.norm(pos - body.R0, axis=1), np.linalg.norm(offsets, axis=1))


def test_generalized_force_moment_arm():
    body = FloatBody()
    f = generalized_force(body, np.array([[0.25, -0.1]]), np.array([[0.0, -2.0]]))
    assert np.allclose(f, [0.0, -2.0, -0.5])


def test_excitation_gain_limits():
    body = FloatBody()
    # a very long wave presses the bottom like hydrostatics: rho g a w
    comp = WaveComponents(np.array([0.01]), np.array([0.05]), np.array([0.05 / math.sqrt(G * 0.8)]), np.array([0.0]))
    exc = WaveExcitation(comp, body, 0.8)
    assert exc(0.0)[1] == pytest.approx(1000 * G * 0.01 * 0.5, rel=1e-3)
    assert abs(exc(0.0)[0]) < 1e-3 * abs(exc(0.0)[1])
    ramped = WaveExcitation(comp, body, 0.8, ramp=2.0)
    assert np.allclose(ramped(0.0), 0) and np.allclose(ramped(3.0), exc(3.0))


def test_body_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        body_step(FloatBody(), CALM, np.zeros(3), HydroCoefficients(), 0.0, 0.0)
