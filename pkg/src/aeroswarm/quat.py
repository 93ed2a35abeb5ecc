"""Unit-quaternion helpers.

Quaternions are numpy arrays [w, x, y, z] representing rotations of the
child frame relative to the parent (world <- body): rotate() maps body
vectors into the parent frame.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0:
        raise ValueError("zero-norm quaternion")
    return q / n


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def rotate(q: np.ndarray, v) -> np.ndarray:
    """Rotate vector v from the child frame into the parent frame."""
    w, x, y, z = q
    vx, vy, vz = v
    # q * [0, v] * q^-1, expanded
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def from_matrix(m: np.ndarray) -> np.ndarray:
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        return normalize(
            np.array(
                [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
            )
        )
    i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
    if i == 0:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif i == 1:
        s = math.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2]) * 2.0
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = math.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2]) * 2.0
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return normalize(np.array(q))


def from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return IDENTITY.copy()
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def from_yaw(yaw: float) -> np.ndarray:
    return np.array([math.cos(0.5 * yaw), 0.0, 0.0, math.sin(0.5 * yaw)])


def yaw_of(q: np.ndarray) -> float:
    """ENU heading: angle of the body x-axis projected on the world xy plane."""
    xb = rotate(q, (1.0, 0.0, 0.0))
    return math.atan2(xb[1], xb[0])


def from_z_yaw(z_axis, yaw: float) -> np.ndarray:
    """Rotation whose body z is z_axis and whose body x projects onto heading yaw.

    Built from the heading's left direction so the projection identity is
    exact at any tilt, not just to second order.
    """
    z_b = np.asarray(z_axis, dtype=float)
    z_b = z_b / np.linalg.norm(z_b)
    y_c = np.array([-math.sin(yaw), math.cos(yaw), 0.0])
    x_b = np.cross(y_c, z_b)
    n = float(np.linalg.norm(x_b))
    if n < 1e-9:  # z pointing along the heading's left: thrust is sideways
        x_b = np.cross(np.array([0.0, 0.0, 1.0]), z_b)
        n = float(np.linalg.norm(x_b))
    x_b = x_b / n
    y_b = np.cross(z_b, x_b)
    return from_matrix(np.column_stack([x_b, y_b, z_b]))


def to_rotvec(q: np.ndarray) -> np.ndarray:
    w = min(1.0, max(-1.0, float(q[0])))
    v = np.array([q[1], q[2], q[3]], dtype=float)
    s = np.linalg.norm(v)
    if s < 1e-12:
        return 2.0 * v  # small-angle: sin(a/2) ~ a/2
    angle = 2.0 * math.atan2(s, w)
    if angle > math.pi:
        angle -= 2.0 * math.pi
    return (angle / s) * v


def slerp(a: np.ndarray, b: np.ndarray, u: float) -> np.ndarray:
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 0.9995:
        return normalize(a + u * (b - a))
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    return (math.sin((1.0 - u) * theta) / s) * a + (math.sin(u * theta) / s) * b


def integrate(q: np.ndarray, w_body, dt: float) -> np.ndarray:
    """Advance orientation by body angular velocity over dt (exact exponential)."""
    wx, wy, wz = w_body
    wn = math.sqrt(wx * wx + wy * wy + wz * wz)
    if wn < 1e-12:
        dq = np.array([1.0, 0.5 * wx * dt, 0.5 * wy * dt, 0.5 * wz * dt])
    else:
        half = 0.5 * wn * dt
        s = math.sin(half) / wn
        dq = np.array([math.cos(half), wx * s, wy * s, wz * s])
    return normalize(multiply(q, dq))


def derivative(q: np.ndarray, w_body) -> np.ndarray:
    """q_dot = 0.5 * q (x) [0, w_body]."""
    return 0.5 * multiply(q, np.array([0.0, w_body[0], w_body[1], w_body[2]]))
