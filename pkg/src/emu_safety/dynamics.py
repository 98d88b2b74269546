"""Serial-manipulator kinematics and directional reflected mass.

Kinematics follow the standard Denavit-Hartenberg convention: joint i rotates
(or translates) about the z axis of frame i-1, and the frame i transform is
Rz(theta)*Tz(d)*Tx(a)*Rx(alpha).  A planar two-link arm with link lengths L1,
L2 is therefore written as two revolute joints with (a=L1, alpha=0, d=0) and
(a=L2, alpha=0, d=0); frame 1 sits at the elbow, frame 2 at the tip.

The quantity this module exists for is the reflected (effective) mass: the
mass a contact point presents in a Cartesian direction u,

    m_u = 1 / (u^T Jv M(q)^{-1} Jv^T u)

with M(q) the joint-space mass matrix and Jv the translational Jacobian at the
contact point.  Directions the mechanism cannot move along yield INFINITE_MASS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ModelError

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

#: Sentinel for directions with no translational mobility (unbounded mass).
INFINITE_MASS = float("inf")


@dataclass(frozen=True)
class Joint:
    """One joint plus the DH parameters of the link frame it moves."""

    kind: str  # revolute | prismatic
    a: float = 0.0
    alpha: float = 0.0
    d: float = 0.0
    theta0: float = 0.0

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ModelError(f"unknown joint type {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Link:
    """Rigid-body properties of one link, expressed in its own DH frame."""

    mass: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        object.__setattr__(self, "inertia", inertia)
        if self.mass <= 0:
            raise ModelError(f"link mass must be > 0, got {self.mass}")
        if inertia.shape != (3, 3):
            raise ModelError(f"inertia must be 3x3 (or a diagonal 3-vector)")
        if not np.allclose(inertia, inertia.T, atol=1e-9):
            raise ModelError("inertia tensor must be symmetric")
        if np.linalg.eigvalsh(inertia).min() < -1e-12:
            raise ModelError("inertia tensor must be positive semi-definite")


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Kinematic/dynamic description of a serial manipulator."""

    joints: tuple[Joint, ...]
    links: tuple[Link, ...]

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "links", tuple(self.links))
        if len(self.joints) != len(self.links):
            raise ModelError(
                f"joint count {len(self.joints)} != link count {len(self.links)}"
            )
        if not self.joints:
            raise ModelError("model needs at least one joint")

    @property
    def dof(self) -> int:
        return len(self.joints)

    def to_dict(self) -> dict:
        return {
            "joints": [
                {"type": j.kind, "a": j.a, "alpha": j.alpha, "d": j.d, "theta0": j.theta0}
                for j in self.joints
            ],
            "links": [
                {"mass": l.mass, "com": l.com.tolist(), "inertia": l.inertia.tolist()}
                for l in self.links
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ArmModel":
        try:
            joints = tuple(
                Joint(
                    kind=j["type"],
                    a=float(j.get("a", 0.0)),
                    alpha=float(j.get("alpha", 0.0)),
                    d=float(j.get("d", 0.0)),
                    theta0=float(j.get("theta0", 0.0)),
                )
                for j in doc["joints"]
            )
            links = tuple(
                Link(mass=float(l["mass"]), com=l.get("com", (0, 0, 0)), inertia=l.get("inertia", np.zeros(3)))
                for l in doc["links"]
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed arm model document: {exc}") from None
        return cls(joints, links)


def _check_config(model: ArmModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape != (model.dof,):
        raise ValueError(f"expected {model.dof} joint values, got {q.shape[0]}")
    return q


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def link_frames(model: ArmModel, q) -> list[np.ndarray]:
    """Base-frame poses [T_0^0, T_0^1, ..., T_0^n]; T_0^0 is the identity."""
    q = _check_config(model, q)
    frames = [np.eye(4)]
    T = np.eye(4)
    for joint, qi in zip(model.joints, q):
        if joint.kind == REVOLUTE:
            T = T @ dh_transform(joint.a, joint.alpha, joint.d, joint.theta0 + qi)
        else:
            T = T @ dh_transform(joint.a, joint.alpha, joint.d + qi, joint.theta0)
        frames.append(T)
    return frames


def forward_kinematics(model: ArmModel, q, point=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Base-frame position of ``point`` (given in the end-effector frame)."""
    T = link_frames(model, q)[-1]
    return T[:3, :3] @ np.asarray(point, dtype=float) + T[:3, 3]


def _point_jacobian(model, frames, p: np.ndarray, last_joint: int) -> np.ndarray:
    """6 x n geometric Jacobian of base-frame point p, using joints <= last_joint."""
    n = model.dof
    J = np.zeros((6, n))
    for j in range(last_joint + 1):
        origin = frames[j][:3, 3]
        z = frames[j][:3, 2]
        if model.joints[j].kind == REVOLUTE:
            J[:3, j] = np.cross(z, p - origin)
            J[3:, j] = z
        else:
            J[:3, j] = z
    return J


def jacobian(model: ArmModel, q, point=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Geometric Jacobian (6 x n) at a point given in the end-effector frame.

    Rows 0..2 map joint rates to the point's linear velocity, rows 3..5 to the
    end-effector angular velocity.
    """
    frames = link_frames(model, q)
    T = frames[-1]
    p = T[:3, :3] @ np.asarray(point, dtype=float) + T[:3, 3]
    return _point_jacobian(model, frames, p, model.dof - 1)


def mass_matrix(model: ArmModel, q) -> np.ndarray:
    """Joint-space mass matrix M(q) = sum_i (Jv_i^T m_i Jv_i + Jw_i^T R I R^T Jw_i)."""
    frames = link_frames(model, q)
    n = model.dof
    M = np.zeros((n, n))
    for i, link in enumerate(model.links):
        T = frames[i + 1]
        R = T[:3, :3]
        p_com = R @ link.com + T[:3, 3]
        J = _point_jacobian(model, frames, p_com, i)
        Jv, Jw = J[:3], J[3:]
        M += link.mass * (Jv.T @ Jv) + Jw.T @ (R @ link.inertia @ R.T) @ Jw
    return M


def reflected_mass(model: ArmModel, q, u, point=(0.0, 0.0, 0.0)) -> float:
    """Effective mass felt at the contact point along unit direction ``u``.

    Returns INFINITE_MASS when the mechanism has no translational mobility
    along u at this configuration (the operational-space compliance vanishes).
    """
    u = np.asarray(u, dtype=float).reshape(3)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, |u| = {np.linalg.norm(u)}")
    M = mass_matrix(model, q)
    frames = link_frames(model, q)
    T = frames[-1]
    p = T[:3, :3] @ np.asarray(point, dtype=float) + T[:3, 3]
    Jv = _point_jacobian(model, frames, p, model.dof - 1)[:3]
    try:
        inv_lambda = Jv @ np.linalg.solve(M, Jv.T)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"mass matrix is singular: {exc}") from None
    w = float(u @ inv_lambda @ u)
    if w <= 1e-12 * max(1.0, float(np.trace(inv_lambda))):
        return INFINITE_MASS
    return 1.0 / w
