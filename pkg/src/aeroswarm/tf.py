"""Transform tree: timestamped rigid transforms between named frames.

Every drone contributes a chain earth -> <ns>/map -> <ns>/odom ->
<ns>/base_link; static world objects hang directly off earth.  Lookups
compose transforms along the unique tree path, interpolating between
stamps (lerp for translation, slerp for rotation) within a sliding
buffer horizon.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import quat
from .msgs import Transform

BUFFER_HORIZON_NS = 10_000_000_000  # 10 s of history per edge
FUTURE_SLACK_NS = 200_000_000  # queries slightly ahead of the newest stamp clamp to it


class TfError(Exception):
    pass


class UnknownFrame(TfError):
    pass


class DisconnectedFrames(TfError):
    pass


class ExtrapolationError(TfError):
    pass


@dataclass(frozen=True)
class RigidTransform:
    """Plain (rotation, translation) pair: maps child coordinates to parent."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, p) -> np.ndarray:
        return quat.rotate(self.rotation, p) + self.translation

    def rotate(self, v) -> np.ndarray:
        return quat.rotate(self.rotation, v)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: first map through other, then through self."""
        return RigidTransform(
            quat.normalize(quat.multiply(self.rotation, other.rotation)),
            quat.rotate(self.rotation, other.translation) + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rot_inv = quat.conjugate(self.rotation)
        return RigidTransform(rot_inv, -quat.rotate(rot_inv, self.translation))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(quat.IDENTITY.copy(), np.zeros(3))


class _Edge:
    def __init__(self, parent: str, child: str, static: bool):
        self.parent = parent
        self.child = child
        self.static = static
        self.stamps: deque[int] = deque()
        self.values: deque[RigidTransform] = deque()

    def insert(self, t: int, value: RigidTransform) -> None:
        if self.stamps and t < self.stamps[-1]:
            return  # out-of-order updates are dropped
        self.stamps.append(t)
        self.values.append(value)
        horizon_start = t - BUFFER_HORIZON_NS
        while len(self.stamps) > 1 and self.stamps[0] < horizon_start:
            self.stamps.popleft()
            self.values.popleft()

    def at(self, t: Optional[int]) -> RigidTransform:
        if self.static:
            return self.values[0]
        if not self.stamps:
            raise ExtrapolationError(f"{self.parent}->{self.child}: no data")
        if t is None:  # newest available
            return self.values[-1]
        if t <= self.stamps[0]:
            if self.stamps[0] - t > BUFFER_HORIZON_NS:
                raise ExtrapolationError(f"{self.parent}->{self.child}: t before buffer")
            return self.values[0]
        if t >= self.stamps[-1]:
            if t - self.stamps[-1] > FUTURE_SLACK_NS:
                raise ExtrapolationError(f"{self.parent}->{self.child}: t beyond buffer")
            return self.values[-1]
        idx = bisect.bisect_right(list(self.stamps), t)
        t0, t1 = self.stamps[idx - 1], self.stamps[idx]
        v0, v1 = self.values[idx - 1], self.values[idx]
        u = (t - t0) / (t1 - t0)
        return RigidTransform(
            quat.slerp(v0.rotation, v1.rotation, u),
            (1.0 - u) * v0.translation + u * v1.translation,
        )


class TfTree:
    """Single-parent frame tree rooted at a shared world frame."""

    def __init__(self, root: str = "earth"):
        self.root = root
        self._edges: dict[str, _Edge] = {}  # keyed by child frame

    def frames(self) -> list[str]:
        names = {self.root}
        for e in self._edges.values():
            names.add(e.parent)
            names.add(e.child)
        return sorted(names)

    def has_frame(self, name: str) -> bool:
        return name == self.root or name in self._edges or any(
            e.parent == name for e in self._edges.values()
        )

    def set_transform(self, tr: Transform, static: bool = False) -> None:
        edge = self._edges.get(tr.child)
        if edge is None:
            if tr.child == self.root:
                raise TfError("root frame cannot have a parent")
            self._check_acyclic(tr.parent, tr.child)
            edge = _Edge(tr.parent, tr.child, static)
            self._edges[tr.child] = edge
        elif edge.parent != tr.parent:
            raise TfError(f"frame {tr.child!r} already has parent {edge.parent!r}")
        edge.insert(tr.t, RigidTransform(quat.normalize(tr.rotation), tr.translation))

    def _check_acyclic(self, parent: str, child: str) -> None:
        node = parent
        while node in self._edges:
            if node == child:
                raise TfError(f"edge {parent!r}->{child!r} would create a cycle")
            node = self._edges[node].parent
        if node == child:
            raise TfError(f"edge {parent!r}->{child!r} would create a cycle")

    def _path_to_root(self, frame: str) -> list[_Edge]:
        path = []
        node = frame
        while node != self.root:
            edge = self._edges.get(node)
            if edge is None:
                raise DisconnectedFrames(f"frame {frame!r} not connected to {self.root!r}")
            path.append(edge)
            node = edge.parent
        return path

    def lookup(self, parent: str, child: str, t: Optional[int] = None) -> RigidTransform:
        """Transform expressing `child` in `parent` coordinates at time t (None: newest)."""
        for f in (parent, child):
            if not self.has_frame(f):
                raise UnknownFrame(f)
        if parent == child:
            return RigidTransform.identity()
        # root <- child composed leaf-upward: each parent edge wraps the
        # transform accumulated so far
        up_child = RigidTransform.identity()
        for edge in self._path_to_root(child):
            up_child = edge.at(t).compose(up_child)
        up_parent = RigidTransform.identity()
        for edge in self._path_to_root(parent):
            up_parent = edge.at(t).compose(up_parent)
        return up_parent.inverse().compose(up_child)

    def lookup_msg(self, parent: str, child: str, t: int) -> Transform:
        rt = self.lookup(parent, child, t)
        return Transform(parent, child, rt.translation, rt.rotation, t)
