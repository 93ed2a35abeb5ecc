"""Message type serialization round-trips and payload validation."""

import numpy as np
import pytest

from aeroswarm.msgs import (
    ActuatorCommand,
    BehaviorResult,
    BehaviorState,
    BehaviorStatus,
    ControlKind,
    ControlMode,
    FlightStatus,
    FrameKind,
    GeoPoint,
    KinematicState,
    MotionReference,
    PlatformInfo,
    Transform,
    YawKind,
    position_reference,
    speed_reference,
)


def test_kinematic_state_round_trip():
    st = KinematicState(
        frame_id="earth",
        t=123456789,
        position=np.array([1.0, -2.0, 3.5]),
        orientation=np.array([0.9238795325112867, 0.0, 0.0, 0.3826834323650898]),
        velocity=np.array([0.1, 0.2, -0.3]),
        angular_velocity=np.array([0.01, -0.02, 0.03]),
    )
    back = KinematicState.from_json(st.to_json())
    assert back.frame_id == "earth"
    assert back.t == 123456789
    for field in ("position", "orientation", "velocity", "angular_velocity"):
        assert np.allclose(getattr(back, field), getattr(st, field))


def test_transform_round_trip():
    tr = Transform(
        parent="earth",
        child="gate1",
        translation=np.array([2.0, 0.0, 1.5]),
        rotation=np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)]),
        t=42,
    )
    back = Transform.from_json(tr.to_json())
    assert (back.parent, back.child, back.t) == ("earth", "gate1", 42)
    assert np.allclose(back.translation, tr.translation)
    assert np.allclose(back.rotation, tr.rotation)


def test_control_mode_round_trip():
    mode = ControlMode(ControlKind.SPEED, YawKind.YAW_SPEED, FrameKind.BODY_FLU)
    back = ControlMode.from_json(mode.to_json())
    assert back == mode
    assert back.control_kind is ControlKind.SPEED


def test_platform_info_round_trip():
    info = PlatformInfo(
        connected=True,
        armed=True,
        offboard=False,
        flight_status=FlightStatus.FLYING,
        active_mode=ControlMode(ControlKind.SPEED, YawKind.YAW_SPEED, FrameKind.LOCAL_ENU),
        supported_modes=(
            ControlMode(ControlKind.SPEED, YawKind.YAW_SPEED, FrameKind.LOCAL_ENU),
            ControlMode(ControlKind.POSITION, YawKind.YAW_ANGLE, FrameKind.LOCAL_ENU),
        ),
    )
    back = PlatformInfo.from_json(info.to_json())
    assert back.flight_status is FlightStatus.FLYING
    assert back.active_mode.control_kind is ControlKind.SPEED
    assert len(back.supported_modes) == 2
    assert back.armed and back.connected and not back.offboard


def test_behavior_status_round_trip():
    bs = BehaviorStatus(state=BehaviorState.RUNNING, last_result=BehaviorResult.NONE, feedback={"height": 1.2})
    back = BehaviorStatus.from_json(bs.to_json())
    assert back.state is BehaviorState.RUNNING
    assert back.last_result is BehaviorResult.NONE
    assert back.feedback["height"] == 1.2


def test_motion_reference_constructors_round_trip():
    ref = speed_reference([1.0, 0.0, 0.0], "earth", yaw_rate=0.2, t=7)
    back = MotionReference.from_json(ref.to_json())
    assert back.mode.control_kind is ControlKind.SPEED
    assert back.mode.yaw_kind is YawKind.YAW_SPEED
    assert np.allclose(back.velocity, [1.0, 0.0, 0.0])
    assert back.yaw == pytest.approx(0.2)

    pref = position_reference([3.0, 2.0, 1.5], "earth", yaw=1.57, t=9)
    pback = MotionReference.from_json(pref.to_json())
    assert pback.mode.control_kind is ControlKind.POSITION
    assert pback.mode.yaw_kind is YawKind.YAW_ANGLE
    assert np.allclose(pback.position, [3.0, 2.0, 1.5])


def test_actuator_command_round_trip():
    cmd = ActuatorCommand(
        mode=ControlMode(ControlKind.ACRO, YawKind.YAW_NONE, FrameKind.BODY_FLU),
        t=9,
        thrust=12.5,
        body_rates=np.array([0.1, 0.0, -0.1]),
    )
    back = ActuatorCommand.from_json(cmd.to_json())
    assert back.thrust == pytest.approx(12.5)
    assert np.allclose(back.body_rates, cmd.body_rates)
    assert back.mode.control_kind is ControlKind.ACRO


def test_vector_shape_validation():
    with pytest.raises(ValueError):
        KinematicState(
            frame_id="earth",
            t=0,
            position=np.zeros(2),
            orientation=np.array([1.0, 0.0, 0.0, 0.0]),
            velocity=np.zeros(3),
            angular_velocity=np.zeros(3),
        )
    with pytest.raises(ValueError):
        ActuatorCommand(mode=ControlMode(), attitude=np.zeros(3))


def test_geo_point_round_trip():
    gp = GeoPoint(40.0, -3.0, 650.0)
    assert GeoPoint.from_json(gp.to_json()) == gp


def test_negotiation_vocabulary_is_complete():
    # mode negotiation priorities depend on these exact members existing
    for name in ("HOVER", "POSITION", "SPEED", "TRAJECTORY", "ATTITUDE", "ACRO"):
        assert hasattr(ControlKind, name)
    for name in ("YAW_ANGLE", "YAW_SPEED", "YAW_NONE"):
        assert hasattr(YawKind, name)
    for name in ("LOCAL_ENU", "BODY_FLU", "GLOBAL_GEO"):
        assert hasattr(FrameKind, name)
