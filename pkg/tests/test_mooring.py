import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from wavecast.errors import InstabilityError
from wavecast.sim.mooring import (
    DegenerateGeometryError,
    MooringLineSpec,
    MooringState,
    initial_shape,
    mooring_forces,
    mooring_step,
    node_accelerations,
    rk2_step,
    settle,
)


def straight(spec, start=(0.0, -0.5), direction=(1.0, 0.0), stretch=1.0, vel=None):
    s = np.linspace(0, spec.length * stretch, spec.n_segments + 1)
    r = np.asarray(start) + np.outer(s, direction)
    v = np.zeros_like(r) if vel is None else vel
    return MooringState(r, v, 0, spec.n_segments)


def test_segment_weight_worked_example():
    # d = 0.01 m steel at 7850 kg/m3 with 0.1 m segments
    spec = MooringLineSpec(mass_per_len=7850 * math.pi / 4 * 1e-4, length=2.0, n_segments=20)
    assert spec.diameter == pytest.approx(0.01)
    f = mooring_forces(straight(spec), spec)
    assert abs(f.weight[5, 1]) == pytest.approx(0.5278, abs=5e-5)
    assert f.weight[0, 1] == pytest.approx(0.5 * f.weight[5, 1])


def test_tension_worked_example():
    spec = MooringLineSpec(mass_per_len=7850 * math.pi / 4 * 1e-4, elastic_modulus=1e9, n_segments=2, length=1.0)
    f = mooring_forces(straight(spec, stretch=1.01), spec)
    assert f.strain == pytest.approx([0.01, 0.01])
    assert f.tension_magnitude == pytest.approx([785.40, 785.40], abs=0.01)
    assert np.allclose(f.tension[:, 1], 0) and np.all(f.tension[:, 0] > 0)


def test_neutral_buoyancy_has_no_weight():
    spec = MooringLineSpec(rho_m=1000.0)
    assert np.all(mooring_forces(straight(spec), spec).weight == 0)


def test_rest_length_without_motion_is_force_free():
    spec = MooringLineSpec(n_segments=4, length=1.0)
    r = np.array([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0], [0.75, 0.0], [1.0, 0.0]])
    f = mooring_forces(MooringState(r, np.zeros_like(r)), spec)
    assert np.all(f.tension == 0) and np.all(f.damping == 0)


def test_compressed_segments_carry_no_tension():
    spec = MooringLineSpec()
    f = mooring_forces(straight(spec, stretch=0.9), spec)
    assert np.all(f.strain < 0)
    assert np.all(f.tension_magnitude == 0)


def test_coincident_nodes_are_rejected():
    spec = MooringLineSpec(n_segments=3, length=1.0)
    r = np.array([[0.0, 0.0], [0.3, 0.0], [0.3, 0.0], [1.0, 0.0]])
    with pytest.raises(DegenerateGeometryError, match="1 and 2"):
        mooring_forces(MooringState(r, np.zeros_like(r)), spec)


@given(st.integers(0, 10_000), st.floats(0.8, 1.2))
def test_internal_forces_cancel_and_invariants_hold(seed, stretch):
    spec = MooringLineSpec()
    r = np.random.default_rng(seed)
    state = straight(spec, start=(0.0, -0.7), direction=(0.8, 0.6), stretch=stretch)
    state = MooringState(state.r + r.normal(0, 0.01, state.r.shape), r.normal(0, 0.1, state.r.shape))
    f = mooring_forces(state, spec)
    assert np.all(np.abs(f.internal().sum(axis=0)) < 1e-10)
    assert np.all(f.tension_magnitude >= 0)
    assert np.all(f.tension_magnitude[f.strain <= 0] == 0)
    above = state.r[:, 1] > spec.z_bot
    assert np.all(f.seabed[above] == 0)


def test_seabed_pushes_up_on_penetrating_nodes():
    spec = MooringLineSpec()
    state = straight(spec, start=(0.0, spec.z_bot - 0.001))
    f = mooring_forces(state, spec)
    assert np.all(f.seabed[:, 1] > 0) and np.all(f.seabed[:, 0] == 0)


def test_added_mass_inverse_solves_the_node_system(rng):
    spec = MooringLineSpec()
    state = straight(spec, direction=(0.6, 0.8), vel=rng.normal(size=(21, 2)))
    f = mooring_forces(state, spec)
    acc = node_accelerations(f, spec)
    for i in (1, 7, 13):
        m = spec.node_mass * np.eye(2) + f.added_mass[i]
        assert np.allclose(np.linalg.solve(m, f.net[i]), acc[i], rtol=1e-12, atol=1e-14)


def test_rk2_is_second_order():
    osc = lambda t, y: np.array([y[1], -y[0]])
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        y = np.array([1.0, 0.0])
        n = int(round(2.0 / dt))
        for s in range(n):
            y = rk2_step(osc, s * dt, y, dt)
        errs.append(abs(y[0] - math.cos(n * dt)))
        assert errs[-1] == pytest.approx(oracles.rk2_oscillator_error(dt), rel=1e-6)
    slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 <= s <= 2.2 for s in slopes), slopes


def test_weightless_line_at_rest_stays_put():
    spec = MooringLineSpec(g=0.0, n_segments=5, length=1.0)
    r = np.column_stack([np.linspace(0, 1, 6), np.zeros(6)])
    state = MooringState(r, np.zeros_like(r))
    out = state
    for _ in range(50):
        out = mooring_step(out, spec, (r[-1], np.zeros(2)), 1e-3)
    assert np.allclose(out.r, r, atol=1e-12) and np.allclose(out.r_dot, 0, atol=1e-10)


def test_ends_are_pinned_and_prescribed():
    spec = MooringLineSpec()
    state = initial_shape(spec, [-1.45, -0.8], [-0.25, -0.1])
    target = (np.array([-0.24, -0.1]), np.array([10.0, 0.0]))
    out = mooring_step(state, spec, target, 1e-3)
    assert np.array_equal(out.r[0], state.r[0]) and np.array_equal(out.r_dot[0], [0, 0])
    assert np.array_equal(out.r[-1], target[0]) and np.array_equal(out.r_dot[-1], target[1])


def test_initial_shape_segments_never_exceed_rest_length():
    spec = MooringLineSpec()
    state = initial_shape(spec, [-1.45, -0.8], [-0.25, -0.1])
    seg = np.linalg.norm(np.diff(state.r, axis=0), axis=1)
    # only the segment spanning the touchdown corner cuts short
    assert np.sum(~np.isclose(seg, spec.seg_len, rtol=1e-9)) <= 1
    assert np.all(seg <= spec.seg_len * (1 + 1e-9))
    assert np.allclose(state.r[0], [-1.45, -0.8]) and np.allclose(state.r[-1], [-0.25, -0.1])


def test_blow_up_reports_instability():
    spec = MooringLineSpec(elastic_modulus=1e12, c_int=0.0)
    state = straight(spec, start=(0.0, -0.5), stretch=1.05)
    with pytest.raises(InstabilityError, match="dt"):
        for _ in range(200):
            state = mooring_step(state, spec, (state.r[-1], np.zeros(2)), 1e-2)


def _suspended_weight(f):
    """Weight of interior nodes minus the share the seabed carries."""
    return -f.weight[1:-1, 1].sum() - f.seabed[1:-1, 1].sum()


def test_hanging_line_settles_to_force_balance():
    spec = MooringLineSpec()
    state = initial_shape(spec, [-1.45, -0.8], [-0.25, -0.1])
    seen = []

    def check(f):
        seen.append(1)
        assert np.all(f.tension_magnitude >= 0)
        assert np.all(np.abs(f.internal().sum(axis=-2)) < 1e-10)

    state = settle(state, spec, 15.0, check=check)
    assert len(seen) == 2 * 15000
    f = mooring_forces(state, spec)
    vertical = -f.fairlead_force()[1]
    assert vertical == pytest.approx(_suspended_weight(f), rel=0.02)
    assert np.max(np.abs(state.r_dot)) < 0.05
