"""Simulated platform tests: flight state machine, command intake,
watchdog fallback, flight-status transitions, and sensor noise
statistics over long runs.
"""

import numpy as np
import pytest

from aeroswarm.bus import MessageBus
from aeroswarm.geodesy import GeoOrigin, geo_to_enu
from aeroswarm.msgs import (
    ActuatorCommand,
    ControlKind,
    ControlMode,
    FlightStatus,
    FrameKind,
    GeoPoint,
    YawKind,
)
from aeroswarm.platform_sim import (
    PlatformConfig,
    SensorSuiteConfig,
    SimulatedPlatform,
    WATCHDOG_NS,
    default_mode_set,
)

SPEED_ENU = ControlMode(ControlKind.SPEED, YawKind.YAW_NONE, FrameKind.LOCAL_ENU)
POSITION_ENU = ControlMode(ControlKind.POSITION, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU)


def make_platform(preset="nimble", origin=None, sensors=None, ns="uav"):
    bus = MessageBus()
    config = PlatformConfig(ns=ns, preset=preset, sensors=sensors or SensorSuiteConfig())
    platform = SimulatedPlatform(bus, config, origin=origin)
    return bus, platform


def arm_offboard(bus, ns="uav"):
    assert bus.call(f"{ns}/platform/arm", {"value": True})["ok"]
    assert bus.call(f"{ns}/platform/offboard", {"value": True})["ok"]


def speed_cmd(v, t=0):
    return ActuatorCommand(mode=SPEED_ENU, t=t, velocity=np.asarray(v, dtype=float))


def climb(bus, platform, ns="uav", seconds=2.0, rate=1.0):
    """Refresh an upward speed command every tick for the given time."""
    for _ in range(int(seconds * 100)):
        bus.publish(f"{ns}/actuator_command", speed_cmd([0.0, 0.0, rate], t=bus.now))
        bus.step()


# --- flight state machine ---------------------------------------------------------


def test_platform_starts_landed_disarmed_with_advertised_modes():
    bus, platform = make_platform()
    info = bus.latched_value("uav/platform/info")
    assert info.flight_status is FlightStatus.LANDED
    assert not info.armed and not info.offboard
    assert info.supported_modes == default_mode_set()


def test_arm_and_offboard_round_trip_on_the_ground():
    bus, platform = make_platform()
    arm_offboard(bus)
    info = bus.latched_value("uav/platform/info")
    assert info.armed and info.offboard
    assert bus.call("uav/platform/arm", {"value": False})["ok"]
    assert not bus.latched_value("uav/platform/info").armed


def test_disarm_refused_while_flying():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform)
    assert bus.latched_value("uav/platform/info").flight_status is FlightStatus.FLYING
    refused = bus.call("uav/platform/arm", {"value": False})
    assert refused["ok"] is False
    assert "FLYING" in refused["reason"]


def test_kill_latches_emergency_and_cuts_thrust():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform)
    z_at_kill = platform.state.p[2]
    assert bus.call("uav/platform/kill", {})["ok"]
    info = bus.latched_value("uav/platform/info")
    assert info.flight_status is FlightStatus.EMERGENCY
    assert not info.armed and not info.offboard
    assert platform.state.thrust_actual == 0.0
    # arming, offboard, and commands all refused while latched
    assert bus.call("uav/platform/arm", {"value": True})["ok"] is False
    assert bus.call("uav/platform/offboard", {"value": True})["ok"] is False
    ok, reason = platform.apply_command(speed_cmd([0, 0, 1]))
    assert not ok and "EMERGENCY" in reason
    # unpowered now: it falls
    bus.run_for(1.0)
    assert platform.state.p[2] < z_at_kill


def test_reset_requires_ground_contact_and_clears_emergency():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform)
    bus.call("uav/platform/kill", {})
    denied = bus.call("uav/platform/reset", {})
    assert denied["ok"] is False  # still falling
    bus.run_until(lambda: platform.on_ground, timeout_s=10.0)
    # grounded but still EMERGENCY until reset
    assert bus.latched_value("uav/platform/info").flight_status is FlightStatus.EMERGENCY
    assert bus.call("uav/platform/reset", {})["ok"]
    assert bus.latched_value("uav/platform/info").flight_status is FlightStatus.LANDED


def test_commands_rejected_unless_armed_and_offboard():
    bus, platform = make_platform()
    ok, reason = platform.apply_command(speed_cmd([0, 0, 1]))
    assert not ok and "armed" in reason
    bus.call("uav/platform/arm", {"value": True})
    ok, _ = platform.apply_command(speed_cmd([0, 0, 1]))
    assert not ok
    bus.call("uav/platform/offboard", {"value": True})
    ok, _ = platform.apply_command(speed_cmd([0, 0, 1]))
    assert ok


def test_commands_in_unadvertised_modes_are_rejected():
    bus, platform = make_platform(preset="carrier")  # no position loop
    arm_offboard(bus)
    cmd = ActuatorCommand(mode=POSITION_ENU, t=0, position=np.array([0.0, 0.0, 1.0]), yaw=0.0)
    ok, reason = platform.apply_command(cmd)
    assert not ok and "not advertised" in reason
    assert platform.last_reject == reason


def test_accepted_command_updates_active_mode():
    bus, platform = make_platform()
    arm_offboard(bus)
    platform.apply_command(speed_cmd([0, 0, 0.5]))
    assert bus.latched_value("uav/platform/info").active_mode == SPEED_ENU


def test_flight_status_follows_altitude():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform, seconds=2.0)
    assert bus.latched_value("uav/platform/info").flight_status is FlightStatus.FLYING
    # command a descent and hold it until touchdown
    for _ in range(1500):
        if platform.on_ground:
            break
        bus.publish("uav/actuator_command", speed_cmd([0, 0, -1.0], t=bus.now))
        bus.step()
    assert platform.on_ground
    assert bus.latched_value("uav/platform/info").flight_status is FlightStatus.LANDED


def test_ground_contact_stops_downward_motion():
    bus, platform = make_platform()
    arm_offboard(bus)
    for _ in range(100):
        bus.publish("uav/actuator_command", speed_cmd([0, 0, -2.0], t=bus.now))
        bus.step()
    assert platform.state.p[2] == 0.0
    assert platform.on_ground


# --- watchdog ----------------------------------------------------------------------


def test_watchdog_degrades_stale_commands_to_a_velocity_hold():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform, seconds=3.0)
    # stop refreshing: the last command is an upward 1 m/s speed
    bus.run_for(WATCHDOG_NS * 1e-9 + 1.5)
    p_settled = platform.state.p.copy()
    assert np.linalg.norm(platform.state.v) < 0.05
    bus.run_for(5.0)
    drift = np.linalg.norm(platform.state.p - p_settled)
    assert drift < 0.02
    # a fresh command re-engages normal tracking
    bus.publish("uav/actuator_command", speed_cmd([0.0, 0.0, 0.5], t=bus.now))
    bus.run_for(0.3)
    assert platform.state.v[2] > 0.2


def test_watchdog_interval_is_not_triggered_by_fresh_streams():
    bus, platform = make_platform()
    arm_offboard(bus)
    climb(bus, platform, seconds=1.0)
    assert platform.state.v[2] > 0.5  # still climbing under the live stream
    assert not platform._watchdog_engaged


# --- sensor statistics ---------------------------------------------------------------


def test_mocap_noise_statistics_match_configuration():
    """Sample std within 5% of sigma and dropout within 2% over 10^4 slots."""
    sigma, dropout = 0.02, 0.2
    sensors = SensorSuiteConfig(mocap_sigma=sigma, mocap_dropout=dropout, rng_seed=3)
    bus, platform = make_platform(sensors=sensors)
    samples = []
    bus.subscribe("uav/sensor/mocap", lambda m: samples.append(m.position.copy()))
    n_slots = 10_000
    for _ in range(n_slots):
        bus.step()
    arrived = len(samples)
    assert abs(arrived / n_slots - (1.0 - dropout)) < 0.02
    err = np.vstack(samples) - platform.state.p  # parked: truth is constant
    std = err.std(axis=0)
    np.testing.assert_allclose(std, sigma, rtol=0.05)
    assert np.abs(err.mean(axis=0)).max() < 5 * sigma / np.sqrt(arrived)


def test_gnss_noise_statistics_match_configuration():
    sig_h, sig_v = 0.08, 0.16
    origin = GeoOrigin().set(GeoPoint(40.0, -3.0, 650.0))
    sensors = SensorSuiteConfig(
        gnss_rate=100.0, gnss_sigma_horizontal=sig_h, gnss_sigma_vertical=sig_v, rng_seed=9
    )
    bus, platform = make_platform(origin=origin, sensors=sensors)
    fixes = []
    bus.subscribe("uav/sensor/gps", lambda g: fixes.append(geo_to_enu(g, origin)))
    for _ in range(10_000):
        bus.step()
    err = np.vstack(fixes) - platform.state.p
    std = err.std(axis=0)
    np.testing.assert_allclose(std[:2], sig_h, rtol=0.05)
    assert std[2] == pytest.approx(sig_v, rel=0.05)


def test_identical_seeds_reproduce_identical_sensor_streams():
    def run(seed):
        sensors = SensorSuiteConfig(mocap_sigma=0.01, mocap_dropout=0.1, rng_seed=seed)
        bus, _ = make_platform(sensors=sensors)
        out = []
        bus.subscribe("uav/sensor/mocap", lambda m: out.append((m.t, tuple(m.position))))
        bus.run_for(3.0)
        return out

    assert run(5) == run(5)
    assert run(5) != run(6)


def test_dropout_setting_never_shifts_surviving_samples():
    """Dropping a sample consumes its noise draw, so survivors line up across settings."""

    def run(dropout):
        sensors = SensorSuiteConfig(mocap_sigma=0.01, mocap_dropout=dropout, rng_seed=12)
        bus, _ = make_platform(sensors=sensors)
        out = {}
        bus.subscribe("uav/sensor/mocap", lambda m: out.__setitem__(m.t, tuple(m.position)))
        bus.run_for(3.0)
        return out

    clean = run(0.0)
    lossy = run(0.5)
    assert 0 < len(lossy) < len(clean)
    for t, p in lossy.items():
        assert clean[t] == p


def test_sensor_rate_divisors_honor_configured_rates():
    sensors = SensorSuiteConfig(ground_truth_rate=50.0, mocap_rate=25.0, gnss_rate=20.0)
    origin = GeoOrigin().set(GeoPoint(40.0, -3.0, 650.0))
    bus, _ = make_platform(origin=origin, sensors=sensors)
    counts = {"odom": 0, "mocap": 0, "gps": 0}
    bus.subscribe("uav/sensor/odom", lambda m: counts.__setitem__("odom", counts["odom"] + 1))
    bus.subscribe("uav/sensor/mocap", lambda m: counts.__setitem__("mocap", counts["mocap"] + 1))
    bus.subscribe("uav/sensor/gps", lambda m: counts.__setitem__("gps", counts["gps"] + 1))
    bus.run_for(10.0)
    assert counts["odom"] == pytest.approx(500, abs=1)
    assert counts["mocap"] == pytest.approx(250, abs=1)
    assert counts["gps"] == pytest.approx(200, abs=1)


def test_closed_loop_position_hold_under_position_mode():
    """Native POSITION emulation parks the drone on the setpoint."""
    bus, platform = make_platform()
    arm_offboard(bus)
    target = np.array([1.0, -1.0, 2.0])
    cmd = ActuatorCommand(mode=POSITION_ENU, t=0, position=target, yaw=0.0)
    for _ in range(800):
        bus.publish("uav/actuator_command", ActuatorCommand(mode=POSITION_ENU, t=bus.now, position=target, yaw=0.0))
        bus.step()
    assert np.linalg.norm(platform.state.p - target) < 0.05
    assert np.linalg.norm(platform.state.v) < 0.05
