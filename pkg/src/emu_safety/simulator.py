"""Discrete-time simulation of a governed linear approach to a human.

A point (the end-effector) travels from a start distance toward a stop
distance.  Each control period the governor limits are evaluated and the
distance is advanced with explicit Euler, d_{k+1} = max(stop, d_k - v_k*dt).

Limits that tighten as the distance shrinks are queried at the distance the
step will reach, not the one it leaves: a commanded velocity then satisfies
the expectation curve at every recorded sample exactly, instead of lagging
one sample behind it.  For the linear curve this amounts to solving
v = a*(d - v*dt) + b, i.e. v = (a*d + b) / (1 + a*dt).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .dynamics import ArmModel, reflected_mass
from .errors import StallError
from .governor import (
    ConditionPolicy,
    SlewLimiter,
    compose_limits,
    DEFAULT_MAX_ACCEL,
)
from .risk import NO_LIMIT, ExpectationCurve
from .smu import SafetyCurveSet


class Sample(NamedTuple):
    t: float
    d_h: float
    v_cmd: float
    active_limit: str


@dataclass(frozen=True)
class SimTrace:
    """Time series produced by one approach run."""

    samples: tuple[Sample, ...]

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True, eq=False)
class ApproachScenario:
    """Configuration of one approach run.

    Either a fixed reflected mass ``m_u`` is given, or an ``arm`` model plus a
    ``joint_path`` (start/end configurations, interpolated over the travel) and
    a contact ``direction``, in which case the reflected mass is recomputed
    every step.
    """

    stop_distance: float
    v_nominal: float
    start_distance: float = 0.44
    dt: float = 0.001
    body_part: str = "chest"
    curvature: str = "flat"
    condition: str | None = None
    m_u: float | None = None
    arm: ArmModel | None = None
    joint_path: tuple | None = None  # (q_start, q_end)
    direction: tuple = (0.0, 1.0, 0.0)
    contact_point: tuple = (0.0, 0.0, 0.0)
    max_accel: float = DEFAULT_MAX_ACCEL
    max_steps: int = 2_000_000
    stall_steps: int = 1_000

    def __post_init__(self):
        if not self.start_distance > self.stop_distance >= 0:
            raise ValueError("need start_distance > stop_distance >= 0")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.v_nominal <= 0:
            raise ValueError(f"v_nominal must be > 0, got {self.v_nominal}")
        if self.m_u is None and (self.arm is None or self.joint_path is None):
            raise ValueError("scenario needs m_u, or an arm model with a joint_path")
        if self.m_u is not None and self.arm is not None:
            raise ValueError("give either a fixed m_u or an arm model, not both")

    @classmethod
    def from_dict(cls, doc: Mapping, arm: ArmModel | None = None) -> "ApproachScenario":
        path = doc.get("joint_path")
        if path is not None:
            path = (np.asarray(path["start"], float), np.asarray(path["end"], float))
        return cls(
            stop_distance=float(doc["stop_distance"]),
            v_nominal=float(doc["v_nominal"]),
            start_distance=float(doc.get("start_distance", 0.44)),
            dt=float(doc.get("dt", 0.001)),
            body_part=doc.get("body_part", "chest"),
            curvature=doc.get("curvature", "flat"),
            condition=doc.get("condition"),
            m_u=(float(doc["m_u"]) if "m_u" in doc and doc["m_u"] is not None else None),
            arm=arm,
            joint_path=path,
            direction=tuple(doc.get("direction", (0.0, 1.0, 0.0))),
            contact_point=tuple(doc.get("contact_point", (0.0, 0.0, 0.0))),
            max_accel=float(doc.get("max_accel", DEFAULT_MAX_ACCEL)),
            max_steps=int(doc.get("max_steps", 2_000_000)),
            stall_steps=int(doc.get("stall_steps", 1_000)),
        )


def _emu_limit(curve: ExpectationCurve, d: float, v_free: float, dt: float, stop: float) -> float:
    """Expectation-curve limit for the step leaving distance ``d``.

    Evaluated at the end-of-step distance; NO_LIMIT when even an unconstrained
    step stays beyond the curve's range.
    """
    if max(stop, d - v_free * dt) > curve.d_max:
        return NO_LIMIT
    v = (curve.a * d + curve.b) / (1.0 + curve.a * dt)
    if d - v * dt >= stop:
        return v
    return curve.a * stop + curve.b  # step lands on the stop point


def run_approach(
    scenario: ApproachScenario,
    curves: SafetyCurveSet,
    policy: ConditionPolicy,
) -> SimTrace:
    """Simulate one governed approach; deterministic for identical inputs."""
    curve = policy.resolve(scenario.condition)
    limiter = SlewLimiter(scenario.max_accel, v0=0.0, t0=-scenario.dt)
    dt = scenario.dt
    stop = scenario.stop_distance
    travel = scenario.start_distance - stop
    d = scenario.start_distance
    samples = []
    stalled = 0
    for k in range(scenario.max_steps):
        t = k * dt
        v_d = scenario.v_nominal if d > stop else 0.0
        if scenario.m_u is not None:
            m_u = scenario.m_u
        else:
            s = min(max((scenario.start_distance - d) / travel, 0.0), 1.0)
            q0, q1 = scenario.joint_path
            m_u = reflected_mass(
                scenario.arm, q0 + s * (q1 - q0), scenario.direction, scenario.contact_point
            )
        v_smu_val = curves.limit(scenario.body_part, scenario.curvature, m_u)
        v_free = min(v_d, v_smu_val)
        v_emu_val = _emu_limit(curve, d, v_free, dt, stop)
        decision = compose_limits(v_d, v_smu_val, v_emu_val)
        v_cmd = limiter.apply(decision.v_safe, t)
        samples.append(Sample(t, d, v_cmd, decision.active_limit))
        if d <= stop and v_cmd == 0.0:
            return SimTrace(tuple(samples))
        if v_cmd == 0.0 and d > stop:
            stalled += 1
            if stalled > scenario.stall_steps:
                raise StallError(
                    f"commanded velocity stuck at 0 for {stalled} steps at d_h = {d}"
                )
        else:
            stalled = 0
        d = max(stop, d - v_cmd * dt)
    raise StallError(f"approach did not terminate within {scenario.max_steps} steps")


# ---------------------------------------------------------------------------
# Trace serialization

TRACE_CSV_HEADER = ("t", "d_h", "v_cmd", "active_limit")


def export_trace(trace: SimTrace, format: str = "csv") -> bytes:
    """Serialize a trace; floats keep full round-trip precision."""
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        for s in trace:
            writer.writerow([repr(s.t), repr(s.d_h), repr(s.v_cmd), s.active_limit])
        return out.getvalue().encode("utf-8")
    if format == "document":
        doc = {
            "samples": [
                {"t": s.t, "d_h": s.d_h, "v_cmd": s.v_cmd, "active_limit": s.active_limit}
                for s in trace
            ]
        }
        return (json.dumps(doc) + "\n").encode("utf-8")
    raise ValueError(f"unsupported trace format {format!r}")


def parse_trace(data: bytes | str, format: str = "csv") -> SimTrace:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    if format == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_CSV_HEADER:
            raise ValueError(f"bad trace header {header!r}")
        samples = tuple(
            Sample(float(t), float(d), float(v), active) for t, d, v, active in reader
        )
        return SimTrace(samples)
    if format == "document":
        doc = json.loads(text)
        samples = tuple(
            Sample(s["t"], s["d_h"], s["v_cmd"], s["active_limit"]) for s in doc["samples"]
        )
        return SimTrace(samples)
    raise ValueError(f"unsupported trace format {format!r}")


def export_plot_data(trace: SimTrace) -> bytes:
    """(d_h, v_cmd) pairs for external plotting of velocity-over-distance."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("d_h", "v_cmd"))
    for s in trace:
        writer.writerow([repr(s.d_h), repr(s.v_cmd)])
    return out.getvalue().encode("utf-8")
