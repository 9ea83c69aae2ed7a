"""Shared value types for the workcell: poses, twists, trajectories, tools,
events, and their canonical JSON document encodings.

All spatial quantities are SI (meters, radians, seconds) expressed in the
cell-root frame unless stated otherwise. Orientations are unit quaternions
stored ``(w, x, y, z)`` and canonicalized to ``w >= 0`` so that value
equality is stable under the double cover. Every type here is immutable and
safe to share between threads.

Document encodings are strict in both directions: ``to_doc`` emits exactly
the canonical keys, ``from_doc`` rejects unknown keys.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

from .errors import InvalidValue, OutOfRange

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

# Unit-quaternion norm tolerance after any operation.
QUAT_NORM_TOL = 1e-9


# ---------------------------------------------------------------------------
# quaternion helpers
# ---------------------------------------------------------------------------

def _quat_normalize(q: Iterable[float]) -> Quat:
    w, x, y, z = (float(c) for c in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if not math.isfinite(n) or n < 1e-8:
        raise InvalidValue(f"degenerate quaternion {(w, x, y, z)}")
    if abs(n - 1.0) > 1e-15:  # keep normalization idempotent at the ulp level
        w, x, y, z = w / n, x / n, y / n, z / n
    if w < 0.0:  # canonical double-cover representative
        w, x, y, z = -w, -x, -y, -z
    return (w, x, y, z)


def quat_multiply(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return _quat_normalize((
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ))


def quat_conjugate(q: Quat) -> Quat:
    w, x, y, z = q
    return _quat_normalize((w, -x, -y, -z))


def quat_rotate(q: Quat, v: Sequence[float]) -> Vec3:
    """Rotate vector ``v`` by quaternion ``q`` (q v q*)."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 (u x v); v' = v + w t + u x t
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_angle(a: Quat, b: Quat) -> float:
    """Angle of the relative rotation between two unit quaternions, in rad.

    atan2 form: well conditioned near both 0 and pi, unlike 2*acos(dot).
    """
    rw = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    rx = a[1] * b[0] - a[0] * b[1] + a[3] * b[2] - a[2] * b[3]
    ry = a[2] * b[0] - a[0] * b[2] + a[1] * b[3] - a[3] * b[1]
    rz = a[3] * b[0] - a[0] * b[3] + a[2] * b[1] - a[1] * b[2]
    return 2.0 * math.atan2(math.sqrt(rx * rx + ry * ry + rz * rz), abs(rw))


def slerp(q0: Quat, q1: Quat, u: float) -> Quat:
    """Spherical interpolation along the shorter arc, canonical result.

    Exact (no arithmetic on the endpoint) at u == 0 and u == 1.
    """
    q0 = _quat_normalize(q0)
    q1 = _quat_normalize(q1)
    if u == 0.0:
        return q0
    if u == 1.0:
        return q1
    dot = sum(a * b for a, b in zip(q0, q1))
    if dot < 0.0:
        q1 = tuple(-c for c in q1)  # type: ignore[assignment]
        dot = -dot
    if dot > 1.0 - 1e-12:
        # nearly parallel: nlerp avoids 0/0
        mixed = tuple((1.0 - u) * a + u * b for a, b in zip(q0, q1))
        return _quat_normalize(mixed)
    theta = math.acos(min(1.0, dot))
    s = math.sin(theta)
    c0 = math.sin((1.0 - u) * theta) / s
    c1 = math.sin(u * theta) / s
    return _quat_normalize(tuple(c0 * a + c1 * b for a, b in zip(q0, q1)))


# ---------------------------------------------------------------------------
# Pose
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """Rigid transform in SE(3): position in meters plus unit quaternion."""

    position: Vec3 = (0.0, 0.0, 0.0)
    orientation: Quat = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        p = tuple(float(c) for c in self.position)
        if len(p) != 3 or not all(math.isfinite(c) for c in p):
            raise InvalidValue(f"bad position {self.position!r}")
        q = self.orientation
        if len(q) != 4:
            raise InvalidValue(f"bad orientation {q!r}")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", _quat_normalize(q))

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    def compose(self, other: "Pose") -> "Pose":
        """a.compose(b): apply ``b`` expressed in ``a``'s frame."""
        return Pose(
            tuple(pc + oc for pc, oc in zip(self.position, quat_rotate(self.orientation, other.position))),
            quat_multiply(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        qi = quat_conjugate(self.orientation)
        px, py, pz = quat_rotate(qi, self.position)
        return Pose((-px, -py, -pz), qi)

    def transform_point(self, v: Sequence[float]) -> Vec3:
        r = quat_rotate(self.orientation, v)
        return tuple(pc + rc for pc, rc in zip(self.position, r))  # type: ignore[return-value]

    def position_distance(self, other: "Pose") -> float:
        return math.dist(self.position, other.position)

    def rotation_distance(self, other: "Pose") -> float:
        return quat_angle(self.orientation, other.orientation)

    def rotation_matrix(self) -> list[list[float]]:
        w, x, y, z = self.orientation
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]

    @classmethod
    def from_rotation_matrix(cls, m: Sequence[Sequence[float]], position: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        """Build from a 3x3 rotation matrix (Shepperd's method)."""
        t = m[0][0] + m[1][1] + m[2][2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            q = (0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s)
        elif m[0][0] >= m[1][1] and m[0][0] >= m[2][2]:
            s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0
            q = ((m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s)
        elif m[1][1] >= m[2][2]:
            s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0
            q = ((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s)
        else:
            s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0
            q = ((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s)
        return cls(tuple(float(c) for c in position), q)

    def to_doc(self) -> dict:
        return {"p": list(self.position), "q": list(self.orientation)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Pose":
        _check_keys(doc, {"p", "q"}, "pose")
        p = _num_list(doc["p"], 3, "pose.p")
        q = _num_list(doc["q"], 4, "pose.q")
        return cls(tuple(p), tuple(q))


def pose_compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def pose_inverse(p: Pose) -> Pose:
    return p.inverse()


# ---------------------------------------------------------------------------
# Twist
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Twist:
    """Cartesian velocity target: linear m/s, angular rad/s."""

    linear: Vec3 = (0.0, 0.0, 0.0)
    angular: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("linear", "angular"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3 or not all(math.isfinite(c) for c in v):
                raise InvalidValue(f"bad twist {name} {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def zero(cls) -> "Twist":
        return cls()

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.linear + self.angular)

    def clamped(self, max_linear: float, max_angular: float) -> "Twist":
        """Scale each part down to its norm limit; direction preserved."""
        def scale(v: Vec3, limit: float) -> Vec3:
            n = math.sqrt(sum(c * c for c in v))
            if n <= limit or n == 0.0:
                return v
            f = limit / n
            return (v[0] * f, v[1] * f, v[2] * f)

        return Twist(scale(self.linear, max_linear), scale(self.angular, max_angular))

    def to_doc(self) -> dict:
        return {"lin": list(self.linear), "ang": list(self.angular)}

    @classmethod
    def from_doc(cls, doc: dict) -> "Twist":
        _check_keys(doc, {"lin", "ang"}, "twist")
        return cls(tuple(_num_list(doc["lin"], 3, "twist.lin")), tuple(_num_list(doc["ang"], 3, "twist.ang")))


# ---------------------------------------------------------------------------
# JointState
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JointState:
    """Joint positions/velocities at a simulation-clock instant."""

    positions: tuple[float, ...]
    velocities: tuple[float, ...] = ()
    timestamp: float = 0.0

    def __post_init__(self):
        pos = tuple(float(c) for c in self.positions)
        vel = tuple(float(c) for c in self.velocities) if self.velocities else (0.0,) * len(pos)
        if not pos or not all(math.isfinite(c) for c in pos + vel):
            raise InvalidValue("joint state components must be finite and non-empty")
        if len(vel) != len(pos):
            raise InvalidValue("velocity vector length must match positions")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def dof(self) -> int:
        return len(self.positions)

    def to_doc(self) -> dict:
        return {"q": list(self.positions), "qd": list(self.velocities), "t": self.timestamp}

    @classmethod
    def from_doc(cls, doc: dict) -> "JointState":
        _check_keys(doc, {"q"}, "joint_state", optional={"qd", "t"})
        q = _num_list(doc["q"], None, "joint_state.q")
        qd = _num_list(doc.get("qd", [0.0] * len(q)), len(q), "joint_state.qd")
        return cls(tuple(q), tuple(qd), float(doc.get("t", 0.0)))


# ---------------------------------------------------------------------------
# Trajectory
# ---------------------------------------------------------------------------

class TrajectoryKind(str, Enum):
    JOINT = "JOINT"
    CARTESIAN = "CARTESIAN"


Sample = Union[JointState, Pose]


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed motion: joint-space samples or Cartesian poses.

    Sample times are strictly increasing and start at exactly 0; at least
    two samples are required.
    """

    kind: TrajectoryKind
    samples: tuple[tuple[float, Sample], ...]
    frame: str | None = None

    def __post_init__(self):
        kind = TrajectoryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        samples = tuple((float(t), s) for t, s in self.samples)
        if len(samples) < 2:
            raise InvalidValue("trajectory needs at least 2 samples")
        if samples[0][0] != 0.0:
            raise InvalidValue("trajectory must start at t=0")
        dof = None
        prev = -math.inf
        for t, s in samples:
            if t <= prev:
                raise InvalidValue("trajectory sample times must strictly increase")
            prev = t
            if kind is TrajectoryKind.JOINT:
                if not isinstance(s, JointState):
                    raise InvalidValue("JOINT trajectory samples must be JointState")
                if dof is None:
                    dof = s.dof
                elif s.dof != dof:
                    raise InvalidValue("inconsistent DOF across samples")
            else:
                if not isinstance(s, Pose):
                    raise InvalidValue("CARTESIAN trajectory samples must be Pose")
        object.__setattr__(self, "samples", samples)
        if kind is TrajectoryKind.CARTESIAN and self.frame is None:
            object.__setattr__(self, "frame", "cell-root")

    @property
    def duration(self) -> float:
        return self.samples[-1][0]

    @property
    def dof(self) -> int:
        if self.kind is not TrajectoryKind.JOINT:
            raise InvalidValue("dof only defined for JOINT trajectories")
        return self.samples[0][1].dof  # type: ignore[union-attr]

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.samples)

    def to_doc(self) -> dict:
        doc: dict = {"kind": self.kind.value}
        if self.kind is TrajectoryKind.JOINT:
            doc["samples"] = [{"t": t, "q": list(s.positions), "qd": list(s.velocities)} for t, s in self.samples]
        else:
            doc["samples"] = [{"t": t, "pose": s.to_doc()} for t, s in self.samples]
            doc["frame"] = self.frame
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "Trajectory":
        _check_keys(doc, {"kind", "samples"}, "trajectory", optional={"frame"})
        kind = TrajectoryKind(doc["kind"])
        raw = doc["samples"]
        if not isinstance(raw, list):
            raise InvalidValue("trajectory.samples must be a list")
        samples = []
        for i, item in enumerate(raw):
            if kind is TrajectoryKind.JOINT:
                _check_keys(item, {"t", "q"}, f"trajectory.samples[{i}]", optional={"qd"})
                q = _num_list(item["q"], None, "sample.q")
                qd = _num_list(item.get("qd", [0.0] * len(q)), len(q), "sample.qd")
                samples.append((float(item["t"]), JointState(tuple(q), tuple(qd), float(item["t"]))))
            else:
                _check_keys(item, {"t", "pose"}, f"trajectory.samples[{i}]")
                samples.append((float(item["t"]), Pose.from_doc(item["pose"])))
        return cls(kind, tuple(samples), doc.get("frame"))


def interpolate(traj: Trajectory, t: float) -> Sample:
    """Sample a trajectory at time ``t``.

    Exact (the stored sample object, no arithmetic) at sample times;
    piecewise-linear between joint samples, position-lerp plus
    orientation-slerp between Cartesian samples.
    """
    times = traj.times
    if t < 0.0 or t > times[-1]:
        raise OutOfRange(f"t={t} outside [0, {times[-1]}]")
    # exact hit: return the stored sample unchanged
    idx = bisect_right(times, t) - 1
    if times[idx] == t:
        return traj.samples[idx][1]
    t0, s0 = traj.samples[idx]
    t1, s1 = traj.samples[idx + 1]
    u = (t - t0) / (t1 - t0)
    if traj.kind is TrajectoryKind.JOINT:
        q = tuple(a + u * (b - a) for a, b in zip(s0.positions, s1.positions))  # type: ignore[union-attr]
        qd = tuple(a + u * (b - a) for a, b in zip(s0.velocities, s1.velocities))  # type: ignore[union-attr]
        return JointState(q, qd, t)
    pos = tuple(a + u * (b - a) for a, b in zip(s0.position, s1.position))  # type: ignore[union-attr]
    return Pose(pos, slerp(s0.orientation, s1.orientation, u))  # type: ignore[union-attr]


# ---------------------------------------------------------------------------
# Tools, resources, events
# ---------------------------------------------------------------------------

class Resource(str, Enum):
    POWER = "POWER"
    DATA = "DATA"
    PNEUMATIC = "PNEUMATIC"


@dataclass(frozen=True)
class ToolDescriptor:
    """An exchangeable end-effector tool; the rack enforces id uniqueness."""

    tool_id: str
    tcp_offset: Pose = field(default_factory=Pose)
    mass: float = 0.0
    resource_needs: frozenset[Resource] = frozenset()

    def __post_init__(self):
        if not self.tool_id:
            raise InvalidValue("tool_id must be non-empty")
        if not isinstance(self.tcp_offset, Pose):
            raise InvalidValue("tcp_offset must be a Pose")
        if self.mass < 0 or not math.isfinite(self.mass):
            raise InvalidValue("tool mass must be finite and >= 0")
        object.__setattr__(self, "resource_needs", frozenset(Resource(r) for r in self.resource_needs))

    def to_doc(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "tcp_offset": self.tcp_offset.to_doc(),
            "mass": self.mass,
            "resource_needs": sorted(r.value for r in self.resource_needs),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ToolDescriptor":
        _check_keys(doc, {"tool_id"}, "tool", optional={"tcp_offset", "mass", "resource_needs"})
        return cls(
            str(doc["tool_id"]),
            Pose.from_doc(doc["tcp_offset"]) if "tcp_offset" in doc else Pose(),
            float(doc.get("mass", 0.0)),
            frozenset(Resource(r) for r in doc.get("resource_needs", [])),
        )


class EventKind(str, Enum):
    ATTACHED = "ATTACHED"
    ONLINE = "ONLINE"
    OFFLINE = "OFFLINE"
    DETACHED = "DETACHED"
    TOOL_CHANGED = "TOOL_CHANGED"
    BRAKE_CHANGED = "BRAKE_CHANGED"
    RACK_CHANGED = "RACK_CHANGED"
    FIXTURE_CHANGED = "FIXTURE_CHANGED"
    STATE_ENTERED = "STATE_ENTERED"
    SKILL_STARTED = "SKILL_STARTED"
    SKILL_FINISHED = "SKILL_FINISHED"
    ROBOT_STATE = "ROBOT_STATE"
    RUN_STARTED = "RUN_STARTED"
    RUN_FINISHED = "RUN_FINISHED"


@dataclass(frozen=True)
class CellEvent:
    """One observable cell fact. Events are never mutated after emission;
    ``seq`` is globally gapless and strictly increasing."""

    seq: int
    sim_time: float
    source: str
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "sim_time": self.sim_time,
            "source": self.source,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CellEvent":
        _check_keys(doc, {"seq", "sim_time", "source", "kind", "payload"}, "event")
        return cls(int(doc["seq"]), float(doc["sim_time"]), str(doc["source"]),
                   EventKind(doc["kind"]), dict(doc["payload"]))


# ---------------------------------------------------------------------------
# strict document helpers
# ---------------------------------------------------------------------------

def _check_keys(doc, required: set, what: str, optional: set = frozenset()):
    if not isinstance(doc, dict):
        raise InvalidValue(f"{what}: expected object, got {type(doc).__name__}")
    keys = set(doc)
    missing = required - keys
    if missing:
        raise InvalidValue(f"{what}: missing keys {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise InvalidValue(f"{what}: unknown keys {sorted(unknown)}")


def _num_list(v, n: int | None, what: str) -> list[float]:
    if not isinstance(v, (list, tuple)):
        raise InvalidValue(f"{what}: expected list")
    if n is not None and len(v) != n:
        raise InvalidValue(f"{what}: expected {n} components, got {len(v)}")
    out = []
    for c in v:
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise InvalidValue(f"{what}: non-numeric component {c!r}")
        out.append(float(c))
    return out
