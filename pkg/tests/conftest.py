import json

import numpy as np
import pytest

from emu_safety import ArmModel, Joint, Link
from emu_safety.config import ConfigBundle, demo_config_path, load_bundle

#: Validated operating points of the 0.15-threshold curve: (distance, velocity).
CURVE_POINTS = [
    (0.00, 0.03),
    (0.05, 0.105),
    (0.10, 0.18),
    (0.15, 0.255),
    (0.20, 0.33),
    (0.25, 0.405),
]


@pytest.fixture(scope="session")
def demo_bundle() -> ConfigBundle:
    return load_bundle(demo_config_path())


@pytest.fixture(scope="session")
def demo_arm() -> ArmModel:
    doc = json.loads(demo_config_path("demo_arm_7dof.json").read_text())
    return ArmModel.from_dict(doc)


@pytest.fixture()
def planar_2r() -> ArmModel:
    """Two revolute joints, unit link lengths, 1 kg point masses at the tips."""
    return ArmModel(
        joints=(Joint("revolute", a=1.0), Joint("revolute", a=1.0)),
        links=(Link(mass=1.0), Link(mass=1.0)),
    )


def planar_2r_fk(q, lengths=(1.0, 1.0)):
    """Closed-form planar forward kinematics, independent of the package."""
    l1, l2 = lengths
    c1, s1 = np.cos(q[0]), np.sin(q[0])
    c12, s12 = np.cos(q[0] + q[1]), np.sin(q[0] + q[1])
    elbow = np.array([l1 * c1, l1 * s1, 0.0])
    tip = elbow + np.array([l2 * c12, l2 * s12, 0.0])
    return elbow, tip


def fd_jacobian(position_fn, q, h=1e-6):
    """Central-difference Jacobian of a position function of q."""
    q = np.asarray(q, dtype=float)
    cols = []
    for j in range(q.size):
        dq = np.zeros_like(q)
        dq[j] = h
        cols.append((position_fn(q + dq) - position_fn(q - dq)) / (2 * h))
    return np.column_stack(cols)


def oracle_kappa(labels_a, labels_b):
    """Direct contingency-table kappa in exact rational arithmetic."""
    from fractions import Fraction

    n = len(labels_a)
    yy = sum(1 for a, b in zip(labels_a, labels_b) if a and b)
    yn = sum(1 for a, b in zip(labels_a, labels_b) if a and not b)
    ny = sum(1 for a, b in zip(labels_a, labels_b) if not a and b)
    nn = n - yy - yn - ny
    p_o = Fraction(yy + nn, n)
    p_a, p_b = Fraction(yy + yn, n), Fraction(yy + ny, n)
    p_e = p_a * p_b + (1 - p_a) * (1 - p_b)
    if p_e == 1:
        return 1.0
    return float((p_o - p_e) / (1 - p_e))


def oracle_reflected_mass_2r(q, u, lengths=(1.0, 1.0), masses=(1.0, 1.0)):
    """Brute-force effective mass for the planar point-mass arm.

    Chain: closed-form FK -> finite-difference COM Jacobians -> point-mass
    mass matrix -> explicit inversion.  Shares no code with the implementation.
    """
    Jc1 = fd_jacobian(lambda qq: planar_2r_fk(qq, lengths)[0], q)
    Jc2 = fd_jacobian(lambda qq: planar_2r_fk(qq, lengths)[1], q)
    M = masses[0] * Jc1.T @ Jc1 + masses[1] * Jc2.T @ Jc2
    Jv = fd_jacobian(lambda qq: planar_2r_fk(qq, lengths)[1], q)
    inv_lambda = Jv @ np.linalg.inv(M) @ Jv.T
    w = float(u @ inv_lambda @ u)
    if w <= 1e-12:
        return float("inf")
    return 1.0 / w
