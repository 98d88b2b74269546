"""Safe Motion Unit: reflected mass -> biomechanically safe velocity lookup.

Safety curves are configuration data keyed by (body part, contact curvature
class); each curve is a piecewise-linear, non-increasing map from reflected
mass to the fastest velocity considered safe for a collision with that body
part.  Curves are never hardcoded here: real ones come from injury experiments
and must be supplied by the integrator (the shipped demo set is synthetic).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, MissingCurveError
from .dynamics import INFINITE_MASS


@dataclass(frozen=True, eq=False)
class SafetyCurve:
    """Non-increasing velocity-over-mass breakpoints for one contact case."""

    body_part: str
    curvature: str
    masses: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        velocities = np.asarray(self.velocities, dtype=float).reshape(-1)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "velocities", velocities)
        if masses.size < 1 or masses.size != velocities.size:
            raise ConfigurationError("curve needs >= 1 (mass, velocity) breakpoints")
        if (masses <= 0).any():
            raise ConfigurationError("breakpoint masses must be > 0")
        if (np.diff(masses) <= 0).any():
            raise ConfigurationError(
                f"breakpoint masses must be strictly increasing for "
                f"({self.body_part}, {self.curvature})"
            )
        if (np.diff(velocities) > 0).any():
            raise ConfigurationError(
                f"safe velocity may not increase with mass for "
                f"({self.body_part}, {self.curvature})"
            )
        if (velocities < 0).any():
            raise ConfigurationError("safe velocities must be >= 0")

    def limit(self, m_u: float) -> float:
        """Safe velocity for reflected mass ``m_u``; saturates outside the range."""
        if not m_u > 0:  # also rejects NaN
            raise ValueError(f"reflected mass must be > 0, got {m_u}")
        return float(np.interp(m_u, self.masses, self.velocities))


class SafetyCurveSet:
    """Immutable lookup of safety curves by (body part, curvature class)."""

    def __init__(self, curves):
        self._curves: dict[tuple[str, str], SafetyCurve] = {}
        for curve in curves:
            key = (curve.body_part, curve.curvature)
            if key in self._curves:
                raise ConfigurationError(f"duplicate safety curve for {key}")
            self._curves[key] = curve
        if not self._curves:
            raise ConfigurationError("safety curve set is empty")

    def curve(self, body_part: str, curvature: str) -> SafetyCurve:
        try:
            return self._curves[(body_part, curvature)]
        except KeyError:
            raise MissingCurveError(
                f"no safety curve configured for ({body_part!r}, {curvature!r})"
            ) from None

    def limit(self, body_part: str, curvature: str, m_u: float) -> float:
        """Safe velocity for a contact case; INFINITE_MASS saturates to the floor."""
        return self.curve(body_part, curvature).limit(m_u)

    def keys(self):
        return sorted(self._curves)

    def to_dict(self) -> dict:
        return {
            "curves": [
                {
                    "body_part": c.body_part,
                    "curvature": c.curvature,
                    "points": [[m, v] for m, v in zip(c.masses, c.velocities)],
                }
                for _, c in sorted(self._curves.items())
            ]
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SafetyCurveSet":
        try:
            entries = doc["curves"]
        except (KeyError, TypeError):
            raise ConfigurationError("safety curve document needs a 'curves' list") from None
        curves = []
        for entry in entries:
            try:
                points = entry["points"]
                masses = [p[0] for p in points]
                velocities = [p[1] for p in points]
                curves.append(
                    SafetyCurve(
                        body_part=str(entry["body_part"]),
                        curvature=str(entry["curvature"]),
                        masses=masses,
                        velocities=velocities,
                    )
                )
            except (KeyError, TypeError, IndexError) as exc:
                raise ConfigurationError(f"malformed safety curve entry: {exc}") from None
        return cls(curves)


def v_smu(curves: SafetyCurveSet, body_part: str, curvature: str, m_u: float) -> float:
    """Safe Motion Unit velocity for the given contact case and reflected mass."""
    return curves.limit(body_part, curvature, m_u)
