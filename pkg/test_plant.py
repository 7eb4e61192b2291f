"""
Plant tests: controller equilibrium, static contact balance, energy decay,
contact law, safety monitor and playback behaviour.
"""

import numpy as np
import pytest

from errors import ConfigError, SimFault
from geometry import Pose, Twist, compose, inverse, pose_log
from plant import (ContactModel, ControllerParams, Cylinder, Hole, Plane, PlantContext, PlantState,
                   SafetyMonitor, contact_wrench, playback, safety_monitor, step)
from trajectory import Trajectory, Wrench


PLANE = ContactModel(Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)), k_env=1e4, d_env=50.0, mu=0.3)
HOLE = ContactModel(Hole((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), 0.010, 0.009, 0.030, 0.001), mu=0.1)


def settle(state, ref, params, contact, steps):
    for _ in range(steps):
        state = step(state, ref, params, contact)
    return state


def lyapunov(state, ref, params):
    e = pose_log(compose(inverse(state.pose), ref)).as_vector()
    twist = state.twist.as_vector()
    return 0.5 * twist @ (params.m_vm * twist) + 0.5 * e @ (params.k_p * params.k_c * e)


def test_default_gains():
    params = ControllerParams()
    assert params.k_c.tolist() == [300, 300, 300, 100, 100, 100]
    assert params.k_p.tolist() == [0.0252, 0.0252, 0.0252, 0.36, 0.36, 0.36]
    assert params.k_d.tolist() == [0.0072] * 6
    assert params.control_rate_hz == 500
    assert params.dt == pytest.approx(0.002)


def test_invalid_gains_rejected():
    with pytest.raises(ConfigError):
        ControllerParams(k_c=(300, 300, 0, 100, 100, 100))
    with pytest.raises(ConfigError):
        ControllerParams(force_sign=0.5)
    with pytest.raises(ConfigError):
        ContactModel(Plane((0, 0, 0), (0, 0, 1)), k_env=-1.0)
    with pytest.raises(ConfigError):
        Hole((0, 0, 0), (0, 0, 1), 0.009, 0.009, 0.03)


def test_equilibrium_is_unchanged():
    params = ControllerParams()
    ref = Pose.from_rotvec((0.1, 0.2, 0.3), (0.4, 0.5, 0.6))
    state = step(PlantState.at_rest(ref), ref, params, None)
    assert state.pose.allclose(ref, atol=1e-12)
    assert np.allclose(state.twist.as_vector(), 0.0, atol=1e-12)


def test_free_space_converges_to_reference():
    params = ControllerParams()
    ref = Pose.from_rotvec((0.0, 0.0, 0.05), (0.01, -0.02, 0.005))
    state = settle(PlantState.at_rest(Pose.identity()), ref, params, None, 10000)
    assert np.linalg.norm(state.pose.translation - ref.translation) < 1e-6
    assert state.pose.allclose(ref, atol=1e-6)


def test_static_plane_balance():
    """Reference 5 mm below the plane: k_c·(depth − pen) = k_env·pen."""
    params = ControllerParams()
    depth, k_c, k_env = 0.005, 300.0, 1e4
    ref = Pose.from_translation((0.0, 0.0, -depth))
    state = settle(PlantState.at_rest(Pose.identity(), PLANE), ref, params, PLANE, 10000)

    penetration = k_c * depth / (k_c + k_env)
    expected = k_env * penetration
    assert expected == pytest.approx(1.4563, abs=1e-4)
    assert abs(state.f_ext.force_norm() - expected) < 1e-4
    assert abs(-state.pose.translation[2] - penetration) < 1e-8


def test_opposite_force_sign_pushes_deeper():
    params = ControllerParams(force_sign=-1.0)
    ref = Pose.from_translation((0.0, 0.0, -0.001))
    state = settle(PlantState.at_rest(Pose.identity(), PLANE), ref, params, PLANE, 200)
    assert state.pose.translation[2] < -0.001


def test_energy_non_increasing_in_free_space():
    params = ControllerParams()
    ref = Pose.from_rotvec((0.01, -0.01, 0.02), (0.005, 0.01, -0.005))
    state = step(PlantState.at_rest(Pose.identity()), ref, params, None)
    energy = lyapunov(state, ref, params)
    for _ in range(2000):
        state = step(state, ref, params, None)
        current = lyapunov(state, ref, params)
        assert current <= energy + 1e-6
        energy = current


def test_velocity_limit_faults():
    params = ControllerParams()
    far = Pose.from_translation((1.0, 0.0, 0.0))
    with pytest.raises(SimFault):
        step(PlantState.at_rest(Pose.identity()), far, params, None, velocity_limit=0.5)


def test_contact_wrench_plane():
    above = contact_wrench(Pose.from_translation((0.0, 0.0, 0.001)), Twist.zero(), PLANE)
    assert np.array_equal(above.as_vector(), np.zeros(6))

    pressed = contact_wrench(Pose.from_translation((0.0, 0.0, -0.001)), Twist.zero(), PLANE)
    assert np.allclose(pressed.force, (0.0, 0.0, 10.0), atol=1e-12)
    assert np.array_equal(pressed.torque, np.zeros(3))

    assert contact_wrench(Pose.identity(), Twist.zero(), None).force_norm() == 0.0


def test_friction_opposes_slip():
    wrench = contact_wrench(Pose.from_translation((0.0, 0.0, -0.001)),
                            Twist((0.1, 0.0, 0.0), (0.0, 0.0, 0.0)), PLANE)
    assert wrench.force[0] < 0
    assert abs(wrench.force[0]) <= 0.3 * wrench.force[2] + 1e-12


def test_contact_complementarity():
    rng = np.random.default_rng(20)
    for contact in (PLANE, HOLE, ContactModel(Cylinder((0, 0, -0.15), (0, 1, 0), 0.15))):
        for _ in range(300):
            pose = Pose.from_translation(rng.uniform(-0.02, 0.02, size=3))
            twist = Twist(rng.normal(scale=0.1, size=3), rng.normal(scale=0.1, size=3))
            wrench = contact_wrench(pose, twist, contact)
            if wrench.force_norm() > 0:
                assert any(p > 0 for p, _ in contact.geometry.contacts(pose.translation))


def test_hole_centered_peg_is_free():
    for depth in np.linspace(0.0, 0.029, 30):
        wrench = contact_wrench(Pose.from_translation((0.0, 0.0, -depth)), Twist.zero(), HOLE)
        assert wrench.force_norm() == 0.0


def test_hole_walls_and_bottom():
    wall = contact_wrench(Pose.from_translation((0.002, 0.0, -0.01)), Twist.zero(), HOLE)
    assert np.allclose(wall.force, (-10.0, 0.0, 0.0), atol=1e-9)

    bottom = contact_wrench(Pose.from_translation((0.0, 0.0, -0.031)), Twist.zero(), HOLE)
    assert np.allclose(bottom.force, (0.0, 0.0, 10.0), atol=1e-9)

    face = contact_wrench(Pose.from_translation((0.02, 0.0, -0.001)), Twist.zero(), HOLE)
    assert np.allclose(face.force, (0.0, 0.0, 10.0), atol=1e-9)


@pytest.mark.parametrize("depth", [0.0005, 0.003])
def test_hole_force_is_continuous_across_the_rim(depth):
    offsets = np.linspace(0.0, 0.015, 1501)
    magnitudes = np.array([
        contact_wrench(Pose.from_translation((x, 0.0, -depth)), Twist.zero(), HOLE).force_norm()
        for x in offsets
    ])
    assert np.max(np.abs(np.diff(magnitudes))) < 0.11
    assert magnitudes[-1] == pytest.approx(1e4 * depth)

    inside = contact_wrench(Pose.from_translation((0.010 - 1e-9, 0.0, -depth)), Twist.zero(), HOLE)
    outside = contact_wrench(Pose.from_translation((0.010 + 1e-9, 0.0, -depth)), Twist.zero(), HOLE)
    assert np.allclose(inside.force, outside.force, atol=1e-4)


def test_peg_on_axis_has_no_lateral_force():
    context = PlantContext(contact=HOLE)
    poses = tuple(Pose.from_translation((0.0, 0.0, 0.01 - 0.045 * k / 99)) for k in range(100))
    measured, stop = context.playback(Trajectory(poses))
    assert stop is None
    forces = measured.forces()
    assert np.all(np.abs(forces[:, :2]) < 1e-12)
    assert forces[-1, 2] > 0


def test_safety_monitor_dwell():
    monitor = SafetyMonitor(limit=100.0, dwell=2)
    assert not monitor.update(Wrench.zero())
    assert not monitor.update(Wrench((150.0, 0.0, 0.0)))
    assert not monitor.update(Wrench.zero())
    assert not monitor.update(Wrench((150.0, 0.0, 0.0)))
    assert monitor.update(Wrench((0.0, 150.0, 0.0)))
    assert monitor.peak == 150.0
    monitor.reset()
    assert monitor.count == 0 and monitor.peak == 0.0

    sustained = [Wrench((150.0, 0.0, 0.0))] * 5
    assert safety_monitor(sustained, 100.0, 2) == 1
    spike = [Wrench((150.0, 0.0, 0.0)), Wrench.zero()] * 3
    assert safety_monitor(spike, 100.0, 2) is None
    assert safety_monitor([Wrench.zero()] * 5) is None

    with pytest.raises(ConfigError):
        SafetyMonitor(limit=0.0)


def test_constant_reference_is_tracked_exactly():
    start = Pose.from_rotvec((0.0, 0.3, 0.0), (0.1, 0.2, 0.3))
    ref = Trajectory((start,) * 20)
    measured, stop = playback(ref, ControllerParams(), None)
    assert stop is None
    assert len(measured) == 20
    for pose in measured.poses:
        assert pose.allclose(start, atol=1e-9)


def test_playback_is_deterministic():
    context = PlantContext(contact=PLANE, wrench_noise_std=0.05, seed=4)
    poses = tuple(Pose.from_translation((0.001 * k, 0.0, -0.002)) for k in range(60))
    a, _ = context.playback(Trajectory(poses))
    b, _ = context.playback(Trajectory(poses))
    assert np.array_equal(a.positions(), b.positions())
    assert np.array_equal(a.forces(), b.forces())


def test_playback_records_one_sample_per_reference_sample():
    context = PlantContext(interpolation="linear")
    poses = tuple(Pose.from_translation((0.001 * k, 0.0, 0.0)) for k in range(25))
    measured, stop = context.playback(Trajectory(poses, rate_hz=50.0))
    assert stop is None
    assert len(measured) == 25
    assert measured.rate_hz == 50.0
    assert measured.has_wrench


def test_playback_protective_stop():
    context = PlantContext(contact=PLANE, force_limit=5.0)
    poses = tuple(Pose.from_translation((0.0, 0.0, -0.03)) for _ in range(50))
    monitor = context.monitor()
    measured, stop = context.playback(Trajectory(poses), PlantState.at_rest(Pose.identity(), PLANE), monitor)
    assert stop is not None
    assert stop.kind == "protective_stop"
    assert stop.force > 5.0
    assert monitor.peak >= stop.force
    assert measured is None or len(measured) == stop.sample_index + 1


def test_playback_fault_becomes_stop_event():
    context = PlantContext(velocity_limit=0.5)
    poses = (Pose.identity(),) + (Pose.from_translation((1.0, 0.0, 0.0)),) * 5
    measured, stop = context.playback(Trajectory(poses))
    assert stop is not None
    assert stop.kind == "fault"
    assert stop.sample_index == 1
    assert len(measured) == 2


def test_steps_per_sample():
    context = PlantContext()
    assert context.steps_per_sample(50.0) == 10
    with pytest.raises(ConfigError):
        context.steps_per_sample(30.0)


def test_context_sections_roundtrip():
    context = PlantContext(contact=HOLE, force_limit=42.0, dwell_steps=3, interpolation="linear",
                           wrench_noise_std=0.1, seed=9)
    sections = context.to_sections()
    again = PlantContext.from_sections(sections)
    assert again.to_sections() == sections
    assert again.replace(force_limit=10.0).force_limit == 10.0

    with pytest.raises(ConfigError):
        PlantContext(interpolation="cubic")
