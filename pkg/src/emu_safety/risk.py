"""Velocity-distance risk matrices for IMO and the expectation curves they imply.

The risk matrix holds, per (distance, velocity) bin, the relative frequency of
involuntary-motion occurrence observed in coded approach trials.  For a chosen
occurrence threshold ``q_r`` the matrix yields per-distance velocity crossings,
and a conservative linear envelope through those crossings becomes the
expectation curve v(d) = a*d + b used by the velocity governor.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BinCoverageError, CurveFitError, EmptyMatrixError
from .trials import MERGE_EITHER_CODER, TrialRecord, merge_imo_by_trial

#: Sentinel returned when a distance lies beyond the curve's validity range.
NO_LIMIT = float("inf")


@dataclass(frozen=True)
class RiskCell:
    """Occurrence counts for one (distance, velocity) bin; centers in m, m/s."""

    d_h: float
    v_r: float
    n_trials: int
    n_imo: int

    def __post_init__(self):
        if self.n_trials <= 0:
            raise ValueError("cells exist only where trials were observed")
        if not 0 <= self.n_imo <= self.n_trials:
            raise ValueError(f"n_imo must be in [0, n_trials], got {self.n_imo}")

    @property
    def f(self) -> float:
        """Relative IMO frequency in this cell."""
        return self.n_imo / self.n_trials


@dataclass(frozen=True)
class RiskMatrix:
    """Sparse grid of risk cells keyed by (distance index, velocity index)."""

    distance_bins: tuple[float, ...]
    velocity_bins: tuple[float, ...]
    cells: dict[tuple[int, int], RiskCell]

    def __post_init__(self):
        for bins in (self.distance_bins, self.velocity_bins):
            if any(b2 <= b1 for b1, b2 in zip(bins, bins[1:])):
                raise ValueError("bins must be strictly increasing")
        for (i, j), cell in self.cells.items():
            if not (0 <= i < len(self.distance_bins) and 0 <= j < len(self.velocity_bins)):
                raise ValueError(f"cell index {(i, j)} outside the bin grid")
            if cell.d_h != self.distance_bins[i] or cell.v_r != self.velocity_bins[j]:
                raise ValueError(f"cell at {(i, j)} disagrees with its bin centers")

    def cells_for_distance(self, i: int) -> list[RiskCell]:
        """Defined cells of distance bin ``i``, sorted by velocity."""
        found = [cell for (di, _), cell in self.cells.items() if di == i]
        return sorted(found, key=lambda c: c.v_r)

    def to_dict(self) -> dict:
        cells = [
            {"d": c.d_h, "v": c.v_r, "n": c.n_trials, "n_imo": c.n_imo, "f": c.f}
            for _, c in sorted(self.cells.items())
        ]
        return {
            "distance_bins": list(self.distance_bins),
            "velocity_bins": list(self.velocity_bins),
            "cells": cells,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RiskMatrix":
        dist = tuple(float(b) for b in doc["distance_bins"])
        vel = tuple(float(b) for b in doc["velocity_bins"])
        cells = {}
        for entry in doc["cells"]:
            i = _match_bin(dist, float(entry["d"]))
            j = _match_bin(vel, float(entry["v"]))
            cell = RiskCell(dist[i], vel[j], int(entry["n"]), int(entry["n_imo"]))
            if "f" in entry and abs(float(entry["f"]) - cell.f) > 1e-9:
                raise ValueError(f"cell {entry} has inconsistent f")
            cells[(i, j)] = cell
        return cls(dist, vel, cells)


def _match_bin(bins: tuple[float, ...], value: float) -> int:
    for i, center in enumerate(bins):
        if abs(center - value) <= 1e-9:
            return i
    raise ValueError(f"value {value} does not lie on the bin grid {bins}")


def _snap_index(value: float, width: float) -> int:
    # nearest bin center on the grid {0, width, 2*width, ...}; half rounds up
    return int(math.floor(value / width + 0.5))


def build_risk_matrix(
    records: Sequence[TrialRecord],
    exclude_first_trial: bool = True,
    distance_bin_width: float = 0.05,
    velocity_bin_width: float = 0.05,
    merge_policy: str = MERGE_EITHER_CODER,
    coder: str | None = None,
) -> RiskMatrix:
    """Aggregate trial records into per-bin IMO frequencies.

    First approaches (trial index 1) are dropped when ``exclude_first_trial``
    since participants do not anticipate them at all; each remaining trial is
    snapped to the nearest bin center.  Coder disagreement is resolved by
    ``merge_policy`` before counting.
    """
    if distance_bin_width <= 0 or velocity_bin_width <= 0:
        raise ValueError("bin widths must be > 0")
    if exclude_first_trial:
        records = [r for r in records if r.trial_index != 1]
    if not records:
        raise EmptyMatrixError("no trials left after first-trial exclusion")
    merged = merge_imo_by_trial(records, merge_policy, coder)
    if not merged:
        raise EmptyMatrixError("no trials left after coder merge")
    counts: dict[tuple[int, int], list[int]] = {}
    for trial in merged:
        key = (
            _snap_index(trial.d_h, distance_bin_width),
            _snap_index(trial.v_r, velocity_bin_width),
        )
        n, n_imo = counts.get(key, (0, 0))
        counts[key] = [n + 1, n_imo + int(trial.imo)]
    d_indices = sorted({k[0] for k in counts})
    v_indices = sorted({k[1] for k in counts})
    distance_bins = tuple(k * distance_bin_width for k in d_indices)
    velocity_bins = tuple(k * velocity_bin_width for k in v_indices)
    d_pos = {k: i for i, k in enumerate(d_indices)}
    v_pos = {k: j for j, k in enumerate(v_indices)}
    cells = {
        (d_pos[kd], v_pos[kv]): RiskCell(
            distance_bins[d_pos[kd]], velocity_bins[v_pos[kv]], n, n_imo
        )
        for (kd, kv), (n, n_imo) in counts.items()
    }
    return RiskMatrix(distance_bins, velocity_bins, cells)


def threshold_crossings(matrix: RiskMatrix, q_r: float) -> list[tuple[float, float]]:
    """Per distance bin, the largest velocity whose interpolated f stays <= q_r.

    f is interpolated linearly between the bin's defined cells.  When every
    sampled f exceeds q_r the crossing is extrapolated proportionally toward
    zero from the slowest sample (v * q_r / f); when none does, the fastest
    sampled velocity is returned (constraint inactive).
    """
    if not 0.0 < q_r < 1.0:
        raise ValueError(f"q_r must be in (0, 1), got {q_r}")
    crossings = []
    for i, d_center in enumerate(matrix.distance_bins):
        cells = matrix.cells_for_distance(i)
        if not cells:
            raise BinCoverageError(f"distance bin {d_center} has no defined cells")
        vs = [c.v_r for c in cells]
        fs = [c.f for c in cells]
        if fs[-1] <= q_r:
            v_cross = vs[-1]
        else:
            v_cross = None
            for k in range(len(vs) - 1, 0, -1):
                if fs[k] > q_r >= fs[k - 1]:
                    v_cross = vs[k - 1] + (q_r - fs[k - 1]) * (vs[k] - vs[k - 1]) / (
                        fs[k] - fs[k - 1]
                    )
                    break
            if v_cross is None:
                # even the slowest sample violates the threshold
                v_cross = vs[0] * q_r / fs[0]
        crossings.append((d_center, v_cross))
    return crossings


@dataclass(frozen=True)
class ExpectationCurve:
    """Linear distance-to-velocity limit v(d) = a*d + b, valid on [0, d_max]."""

    q_r: float
    a: float
    b: float
    d_max: float

    def __post_init__(self):
        if not 0.0 < self.q_r < 1.0:
            raise ValueError(f"q_r must be in (0, 1), got {self.q_r}")
        if self.a < 0 or self.b < 0:
            raise ValueError("slope and intercept must be >= 0")
        if self.d_max <= 0:
            raise ValueError(f"d_max must be > 0, got {self.d_max}")

    def limit(self, d_h: float) -> float:
        """Velocity limit at distance ``d_h``; NO_LIMIT beyond d_max."""
        if d_h < 0:
            raise ValueError(f"d_h must be >= 0, got {d_h}")
        if d_h > self.d_max:
            return NO_LIMIT
        return self.a * d_h + self.b

    def to_dict(self) -> dict:
        return {"q_r": self.q_r, "a": self.a, "b": self.b, "d_max": self.d_max}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExpectationCurve":
        return cls(
            q_r=float(doc["q_r"]),
            a=float(doc["a"]),
            b=float(doc["b"]),
            d_max=float(doc["d_max"]),
        )


def fit_expectation_curve(
    crossings: Iterable[tuple[float, float]],
    q_r: float,
    d_max: float = 0.30,
) -> ExpectationCurve:
    """Conservative linear envelope under the threshold crossings.

    A least-squares line is fit through the (distance, velocity) crossings and
    then shifted down by the smallest amount that puts it at or below every
    crossing.  A negative slope is clamped to zero (re-anchoring the intercept
    at the lowest crossing); if the envelope would need a negative intercept,
    the intercept is pinned at zero and the slope reduced instead so the line
    still never exceeds a crossing.
    """
    pts = [(float(d), float(v)) for d, v in crossings]
    if len(pts) < 2:
        raise CurveFitError(f"need >= 2 crossings, got {len(pts)}")
    d = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    spread = float(np.sum((d - d.mean()) ** 2))
    if spread == 0.0 or not np.isfinite(spread):
        raise CurveFitError("crossing distances are (numerically) indistinct")
    a_ls = float(np.sum((d - d.mean()) * (v - v.mean())) / spread)
    b_ls = float(v.mean() - a_ls * d.mean())
    if not (np.isfinite(a_ls) and np.isfinite(b_ls)):
        raise CurveFitError("least-squares fit did not converge to finite parameters")
    if a_ls < 0:
        a, b0 = 0.0, float(np.mean(v))
    else:
        a, b0 = float(a_ls), float(b_ls)
    b = min(b0, float(np.min(v - a * d)))
    if b < 0:
        b = 0.0
        positive_d = d > 0
        if positive_d.any():
            a = min(a, float(np.min(v[positive_d] / d[positive_d])))
        a = max(a, 0.0)
    return ExpectationCurve(q_r=q_r, a=a, b=b, d_max=d_max)


def eval_expectation(curve: ExpectationCurve, d_h: float) -> float:
    """Velocity limit at ``d_h``; returns NO_LIMIT past the curve's range."""
    return curve.limit(d_h)


def parse_crossings(text: str) -> list[tuple[float, float]]:
    """Parse a crossings CSV with header ``d_h,v_cross``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != ("d_h", "v_cross"):
        raise ValueError(f"bad crossings header {header!r}, expected d_h,v_cross")
    return [(float(d), float(v)) for d, v in (row for row in reader if row)]


# ---------------------------------------------------------------------------
# Proxemics

_ZONE_BOUNDS = (0.15, 0.45, 1.20, 3.60)
_ZONE_NAMES = ("close_intimate", "intimate", "personal", "social", "public")


def proxemic_zone(d_h: float) -> str:
    """Social-distance zone of a separation; intervals are half-open [lo, hi)."""
    if d_h < 0:
        raise ValueError(f"d_h must be >= 0, got {d_h}")
    return _ZONE_NAMES[bisect_right(_ZONE_BOUNDS, d_h)]
