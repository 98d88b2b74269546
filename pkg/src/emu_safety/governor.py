"""Velocity governor: min-composition of nominal, SMU and EMU limits.

The commanded velocity is the smallest of the nominal speed, the
biomechanical SMU limit, and (within the expectation curve's range) the EMU
limit; past the curve's range only the SMU constrains.  The slew limiter
rate-limits increases but lets decreases through instantly so that a safety
limit binds the moment it appears.
"""

from __future__ import annotations

from typing import Mapping, NamedTuple

from .errors import PolicyError
from .risk import NO_LIMIT, ExpectationCurve
from .smu import SafetyCurveSet

ACTIVE_NOMINAL = "nominal"
ACTIVE_SMU = "smu"
ACTIVE_EMU = "emu"

DEFAULT_CONDITION = "attentive"
DEFAULT_MAX_ACCEL = 2.0  # m/s^2, ramp-up rate; decreases are never limited


class GovernorInput(NamedTuple):
    v_d: float  # nominal desired speed, m/s
    m_u: float  # reflected mass, kg (may be INFINITE_MASS)
    d_h: float  # human-robot distance, m
    body_part: str
    curvature: str
    condition: str | None = None  # None -> policy default


class GovernorDecision(NamedTuple):
    v_safe: float
    active_limit: str  # nominal | smu | emu


class ConditionPolicy:
    """Maps human-condition tokens to the expectation curve to enforce."""

    def __init__(self, curves: Mapping[str, ExpectationCurve], default: str = DEFAULT_CONDITION):
        if not curves:
            raise PolicyError("condition policy needs at least one curve")
        if default not in curves:
            raise PolicyError(f"default condition {default!r} has no curve")
        self._curves = dict(curves)
        self.default = default

    def resolve(self, condition: str | None) -> ExpectationCurve:
        token = self.default if condition is None else condition
        try:
            return self._curves[token]
        except KeyError:
            raise PolicyError(f"no expectation curve for condition {token!r}") from None

    def conditions(self):
        return sorted(self._curves)

    def to_dict(self) -> dict:
        return {
            "default_condition": self.default,
            "curves": {token: c.to_dict() for token, c in sorted(self._curves.items())},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ConditionPolicy":
        curves = {
            token: ExpectationCurve.from_dict(c) for token, c in doc["curves"].items()
        }
        return cls(curves, default=doc.get("default_condition", DEFAULT_CONDITION))


def compose_limits(v_d: float, v_smu: float, v_emu: float) -> GovernorDecision:
    """Pick the binding limit; ties resolve toward the more restrictive semantic
    (emu over smu over nominal).  ``v_emu`` may be NO_LIMIT."""
    v = min(v_d, v_smu, v_emu)
    if v_emu <= v_d and v_emu <= v_smu:
        return GovernorDecision(v, ACTIVE_EMU)
    if v_smu <= v_d:
        return GovernorDecision(v, ACTIVE_SMU)
    return GovernorDecision(v, ACTIVE_NOMINAL)


def v_safe(inp: GovernorInput, curves: SafetyCurveSet, policy: ConditionPolicy) -> GovernorDecision:
    """Evaluate the safe velocity for one input sample."""
    if inp.v_d < 0:
        raise ValueError(f"v_d must be >= 0, got {inp.v_d}")
    curve = policy.resolve(inp.condition)
    v_smu_val = curves.limit(inp.body_part, inp.curvature, inp.m_u)
    v_emu_val = curve.limit(inp.d_h)  # NO_LIMIT past d_max; raises on d_h < 0
    return compose_limits(inp.v_d, v_smu_val, v_emu_val)


class Governor:
    """Shared evaluation object for control loops and the limit service.

    The configuration (safety curves + condition policy) is held as one
    reference and read exactly once per evaluation, so a concurrent
    :meth:`reload` swaps the whole bundle atomically between calls; readers
    never observe a half-updated configuration.
    """

    def __init__(self, curves: SafetyCurveSet, policy: ConditionPolicy):
        self._bundle = (curves, policy)

    def evaluate(self, inp: GovernorInput) -> GovernorDecision:
        curves, policy = self._bundle
        return v_safe(inp, curves, policy)

    def reload(self, curves: SafetyCurveSet, policy: ConditionPolicy) -> None:
        self._bundle = (curves, policy)


class SlewLimiter:
    """Asymmetric rate limiter: ramped increases, instantaneous decreases."""

    __slots__ = ("max_accel", "_v", "_t")

    def __init__(self, max_accel: float = DEFAULT_MAX_ACCEL, v0: float = 0.0, t0: float = 0.0):
        if not max_accel > 0:
            raise ValueError(f"max_accel must be > 0, got {max_accel}")
        self.max_accel = max_accel
        self._v = v0
        self._t = t0

    @property
    def last_v(self) -> float:
        return self._v

    @property
    def last_t(self) -> float:
        return self._t

    def apply(self, v_target: float, t: float) -> float:
        """Advance to time ``t`` and move toward ``v_target`` within the ramp."""
        if t <= self._t:
            raise ValueError(f"timestamps must increase, got {t} after {self._t}")
        if v_target >= self._v:
            v = min(v_target, self._v + self.max_accel * (t - self._t))
        else:
            v = v_target  # a dropping limit must bind immediately
        self._v = v
        self._t = t
        return v
