import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.exceptions import NotFittedError

from emu_safety import (
    ExpectationCurve,
    NO_LIMIT,
    RiskCell,
    RiskMatrix,
    TrialRecord,
    build_risk_matrix,
    eval_expectation,
    fit_expectation_curve,
    proxemic_zone,
    threshold_crossings,
)
from emu_safety.errors import BinCoverageError, CurveFitError, EmptyMatrixError
from emu_safety.estimator import ExpectationCurveEstimator
from emu_safety.risk import parse_crossings

from conftest import CURVE_POINTS


def trials_for_cell(d, v, n, n_imo, start=0, trial_index=2, coder="C1"):
    """n single-coder trials snapped to one (d, v) cell, n_imo of them with a cue."""
    out = []
    for i in range(n):
        cues = frozenset({"RE"}) if i < n_imo else frozenset()
        out.append(TrialRecord(f"P{start + i:03d}", trial_index, d, v, cues, False, coder))
    return out


class TestBuildMatrix:
    def test_planted_frequency(self):
        records = trials_for_cell(0.10, 0.25, n=20, n_imo=3)
        matrix = build_risk_matrix(records)
        (cell,) = matrix.cells.values()
        assert cell.n_trials == 20 and cell.n_imo == 3
        assert cell.f == 0.15

    def test_exclusion_drops_exactly_first_trials(self):
        # all IMO happens on the unanticipated first approach
        first = trials_for_cell(0.10, 0.25, n=10, n_imo=10, trial_index=1)
        later = trials_for_cell(0.10, 0.25, n=10, n_imo=0, start=10, trial_index=2)
        matrix = build_risk_matrix(first + later, exclude_first_trial=True)
        assert all(cell.f == 0.0 for cell in matrix.cells.values())
        assert sum(c.n_trials for c in matrix.cells.values()) == 10

        kept = build_risk_matrix(first + later, exclude_first_trial=False)
        assert sum(c.n_trials for c in kept.cells.values()) == 20

    def test_nearest_center_snapping(self):
        records = trials_for_cell(0.24, 0.25, n=5, n_imo=1)
        matrix = build_risk_matrix(records, distance_bin_width=0.05)
        assert matrix.distance_bins == (0.25,)

    def test_empty_after_exclusion(self):
        records = trials_for_cell(0.10, 0.25, n=4, n_imo=1, trial_index=1)
        with pytest.raises(EmptyMatrixError):
            build_risk_matrix(records, exclude_first_trial=True)

    def test_bad_bin_widths(self):
        records = trials_for_cell(0.10, 0.25, n=4, n_imo=1)
        with pytest.raises(ValueError):
            build_risk_matrix(records, distance_bin_width=0.0)
        with pytest.raises(ValueError):
            build_risk_matrix(records, velocity_bin_width=-0.1)

    def test_exclusion_noop_without_first_trials(self):
        records = trials_for_cell(0.10, 0.25, n=8, n_imo=2) + trials_for_cell(
            0.20, 0.55, n=6, n_imo=1, start=8
        )
        assert build_risk_matrix(records, exclude_first_trial=True) == build_risk_matrix(
            records, exclude_first_trial=False
        )

    @given(
        st.lists(
            st.tuples(st.integers(0, 4), st.integers(0, 5), st.integers(1, 12), st.integers(0, 12)),
            min_size=1,
            max_size=8,
        )
    )
    def test_cell_counts_are_exact(self, spec):
        records = []
        start = 0
        for kd, kv, n, imo in spec:
            records += trials_for_cell(kd * 0.05, 0.25 + kv * 0.05, n, min(imo, n), start)
            start += n
        matrix = build_risk_matrix(records)
        per_cell_expected = {}
        for kd, kv, n, imo in spec:
            key = (kd, kv)
            a, b = per_cell_expected.get(key, (0, 0))
            per_cell_expected[key] = (a + n, b + min(imo, n))
        assert sum(c.n_trials for c in matrix.cells.values()) == sum(
            n for _, _, n, _ in spec
        )
        for cell in matrix.cells.values():
            # f * n must reproduce the integer count exactly
            assert cell.f * cell.n_trials == pytest.approx(cell.n_imo, abs=0)
            assert 0.0 <= cell.f <= 1.0


class TestRiskCellAndMatrix:
    def test_cell_validation(self):
        with pytest.raises(ValueError):
            RiskCell(0.1, 0.25, 0, 0)
        with pytest.raises(ValueError):
            RiskCell(0.1, 0.25, 5, 6)

    def test_bins_must_increase(self):
        cell = RiskCell(0.0, 0.25, 5, 1)
        with pytest.raises(ValueError):
            RiskMatrix((0.0, 0.0), (0.25,), {(0, 0): cell})

    def test_cell_key_must_match_grid(self):
        cell = RiskCell(0.05, 0.25, 5, 1)
        with pytest.raises(ValueError):
            RiskMatrix((0.0, 0.05), (0.25,), {(0, 0): cell})

    def test_round_trip(self):
        records = trials_for_cell(0.10, 0.25, 9, 2) + trials_for_cell(0.15, 0.55, 7, 3, start=9)
        matrix = build_risk_matrix(records)
        again = RiskMatrix.from_dict(matrix.to_dict())
        assert again == matrix

    def test_from_dict_rejects_off_grid_cell(self):
        doc = {
            "distance_bins": [0.0, 0.05],
            "velocity_bins": [0.25],
            "cells": [{"d": 0.02, "v": 0.25, "n": 5, "n_imo": 1}],
        }
        with pytest.raises(ValueError, match="grid"):
            RiskMatrix.from_dict(doc)

    def test_from_dict_rejects_inconsistent_f(self):
        doc = {
            "distance_bins": [0.0],
            "velocity_bins": [0.25],
            "cells": [{"d": 0.0, "v": 0.25, "n": 5, "n_imo": 1, "f": 0.9}],
        }
        with pytest.raises(ValueError, match="inconsistent"):
            RiskMatrix.from_dict(doc)


def matrix_from_fs(fs_by_bin, velocities, distances=None):
    """Build a matrix with prescribed frequencies out of 20-trial cells."""
    distances = distances or [0.05 * i for i in range(len(fs_by_bin))]
    cells = {}
    for i, fs in enumerate(fs_by_bin):
        for j, f in enumerate(fs):
            if f is None:
                continue
            cells[(i, j)] = RiskCell(distances[i], velocities[j], 20, round(20 * f))
    return RiskMatrix(tuple(distances), tuple(velocities), cells)


class TestThresholdCrossings:
    def test_interpolated_crossing(self):
        # f(0.25) = 0.10, f(0.55) = 0.40; 0.15 is reached at v = 0.30
        matrix = matrix_from_fs([[0.10, 0.40]], [0.25, 0.55])
        ((d, v),) = threshold_crossings(matrix, 0.15)
        assert v == pytest.approx(0.30, abs=1e-12)

    def test_constraint_inactive(self):
        matrix = matrix_from_fs([[0.0, 0.0, 0.0]], [0.25, 0.55, 0.75])
        ((_, v),) = threshold_crossings(matrix, 0.15)
        assert v == 0.75

    def test_proportional_extrapolation(self):
        matrix = matrix_from_fs([[0.30]], [0.25])
        ((_, v),) = threshold_crossings(matrix, 0.15)
        assert v == pytest.approx(0.125, abs=1e-15)

    def test_all_cells_violating(self):
        matrix = matrix_from_fs([[0.30, 0.50]], [0.25, 0.55])
        ((_, v),) = threshold_crossings(matrix, 0.15)
        assert v == pytest.approx(0.25 * 0.15 / 0.30, abs=1e-15)

    def test_topmost_dip_wins(self):
        # f dips back under the threshold at higher velocity
        matrix = matrix_from_fs([[0.05, 0.30, 0.10, 0.50]], [0.2, 0.4, 0.6, 0.8])
        ((_, v),) = threshold_crossings(matrix, 0.15)
        expected = 0.6 + (0.15 - 0.10) / (0.50 - 0.10) * 0.2
        assert v == pytest.approx(expected, abs=1e-12)

    def test_coverage_error_names_bin(self):
        cell = RiskCell(0.0, 0.25, 20, 1)
        matrix = RiskMatrix((0.0, 0.05), (0.25,), {(0, 0): cell})
        with pytest.raises(BinCoverageError, match="0.05"):
            threshold_crossings(matrix, 0.15)

    @pytest.mark.parametrize("q_r", [0.0, 1.0, -0.1, 1.5])
    def test_q_r_domain(self, q_r):
        matrix = matrix_from_fs([[0.1]], [0.25])
        with pytest.raises(ValueError):
            threshold_crossings(matrix, q_r)

    @given(
        st.lists(st.integers(0, 20), min_size=2, max_size=6),
        st.floats(0.02, 0.98),
    )
    def test_interior_crossing_hits_threshold(self, imo_counts, q_r):
        velocities = [0.2 + 0.1 * j for j in range(len(imo_counts))]
        fs = [c / 20 for c in imo_counts]
        matrix = matrix_from_fs([fs], velocities)
        ((_, v),) = threshold_crossings(matrix, q_r)
        interior = velocities[0] < v < velocities[-1] and v not in velocities
        if interior:
            assert float(np.interp(v, velocities, fs)) == pytest.approx(q_r, abs=1e-9)


class TestFitExpectationCurve:
    def test_exact_fit_on_operating_points(self):
        curve = fit_expectation_curve(CURVE_POINTS, q_r=0.15, d_max=0.30)
        assert curve.a == pytest.approx(1.5, abs=1e-9)
        assert curve.b == pytest.approx(0.03, abs=1e-9)
        residual = max(abs(curve.a * d + curve.b - v) for d, v in CURVE_POINTS)
        assert residual < 1e-9

    def test_flat_line(self):
        curve = fit_expectation_curve([(0.0, 0.1), (0.1, 0.1)], q_r=0.15)
        assert curve.a == pytest.approx(0.0, abs=1e-12)
        assert curve.b == pytest.approx(0.1, abs=1e-12)

    def test_negative_slope_clamped(self):
        curve = fit_expectation_curve([(0.0, 0.4), (0.1, 0.3), (0.2, 0.1)], q_r=0.15)
        assert curve.a == 0.0
        assert curve.b == 0.1  # re-anchored at the lowest crossing

    def test_too_few_crossings(self):
        with pytest.raises(CurveFitError):
            fit_expectation_curve([(0.1, 0.2)], q_r=0.15)

    def test_degenerate_single_distance(self):
        with pytest.raises(CurveFitError):
            fit_expectation_curve([(0.1, 0.2), (0.1, 0.3)], q_r=0.15)

    def test_negative_envelope_intercept_reduces_slope(self):
        # steep least-squares line, tiny velocity near the origin
        crossings = [(0.05, 0.01), (0.10, 0.50), (0.20, 1.00)]
        curve = fit_expectation_curve(crossings, q_r=0.15)
        assert curve.b == 0.0
        for d, v in crossings:
            assert curve.a * d + curve.b <= v + 1e-12

    @given(
        st.lists(
            st.tuples(st.floats(0.0, 0.5), st.floats(0.0, 1.5)),
            min_size=2,
            max_size=12,
            unique_by=lambda p: p[0],
        )
    )
    def test_envelope_is_conservative(self, crossings):
        try:
            curve = fit_expectation_curve(crossings, q_r=0.15)
        except CurveFitError:
            return
        for d, v in crossings:
            assert curve.a * d + curve.b <= v + 1e-12

    def test_parse_crossings_csv(self):
        text = "d_h,v_cross\n0.0,0.03\n0.05,0.105\n"
        assert parse_crossings(text) == [(0.0, 0.03), (0.05, 0.105)]
        with pytest.raises(ValueError):
            parse_crossings("a,b\n1,2\n")


class TestEvalExpectation:
    @pytest.fixture()
    def curve(self):
        return ExpectationCurve(q_r=0.15, a=1.5, b=0.03, d_max=0.30)

    def test_operating_points(self, curve):
        for d, v in CURVE_POINTS:
            assert eval_expectation(curve, d) == pytest.approx(v, abs=1e-12)

    def test_at_zero(self, curve):
        assert eval_expectation(curve, 0.0) == 0.03

    def test_beyond_range(self, curve):
        assert eval_expectation(curve, 0.44) == NO_LIMIT
        assert math.isinf(curve.limit(0.31))

    def test_at_d_max_inclusive(self, curve):
        assert curve.limit(0.30) == pytest.approx(1.5 * 0.30 + 0.03, abs=1e-15)

    def test_negative_distance(self, curve):
        with pytest.raises(ValueError):
            curve.limit(-0.01)

    @given(st.floats(0.0, 0.30), st.floats(0.0, 0.30))
    def test_monotone_on_valid_range(self, d1, d2):
        curve = ExpectationCurve(q_r=0.15, a=1.5, b=0.03, d_max=0.30)
        lo, hi = sorted((d1, d2))
        assert curve.limit(lo) <= curve.limit(hi)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            ExpectationCurve(q_r=0.0, a=1.0, b=0.0, d_max=0.3)
        with pytest.raises(ValueError):
            ExpectationCurve(q_r=0.15, a=-1.0, b=0.0, d_max=0.3)
        with pytest.raises(ValueError):
            ExpectationCurve(q_r=0.15, a=1.0, b=-0.1, d_max=0.3)
        with pytest.raises(ValueError):
            ExpectationCurve(q_r=0.15, a=1.0, b=0.0, d_max=0.0)

    def test_round_trip(self, curve):
        assert ExpectationCurve.from_dict(curve.to_dict()) == curve


class TestProxemicZone:
    @pytest.mark.parametrize(
        "d,zone",
        [
            (0.0, "close_intimate"),
            (0.10, "close_intimate"),
            (0.15, "intimate"),
            (0.30, "intimate"),
            (0.45, "personal"),
            (1.0, "personal"),
            (1.20, "social"),
            (3.59, "social"),
            (3.60, "public"),
            (5.0, "public"),
        ],
    )
    def test_zones(self, d, zone):
        assert proxemic_zone(d) == zone

    def test_negative(self):
        with pytest.raises(ValueError):
            proxemic_zone(-0.1)


class TestEstimator:
    def synthetic_records(self):
        records = []
        start = 0
        # frequencies rise as the robot gets closer and faster
        for i, d in enumerate([0.0, 0.05, 0.10, 0.15, 0.20, 0.25]):
            for j, v in enumerate([0.25, 0.55, 0.80]):
                n_imo = max(0, 2 + 2 * j - i)
                records += trials_for_cell(d, v, 10, min(n_imo, 10), start)
                start += 10
        return records

    def test_fit_predict(self):
        est = ExpectationCurveEstimator(q_r=0.15, d_max=0.30)
        est.fit(self.synthetic_records())
        curve = est.curve_
        distances = np.array([0.0, 0.1, 0.25, 0.35])
        predicted = est.predict(distances)
        assert predicted[:3] == pytest.approx(
            [curve.limit(d) for d in distances[:3]], abs=0
        )
        assert math.isinf(predicted[3])

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            ExpectationCurveEstimator().predict([0.1])

    def test_predict_rejects_negative(self):
        est = ExpectationCurveEstimator().fit(self.synthetic_records())
        with pytest.raises(ValueError):
            est.predict([-0.1])

    def test_get_params_round_trip(self):
        est = ExpectationCurveEstimator(q_r=0.3, coder="C2")
        params = est.get_params()
        assert params["q_r"] == 0.3 and params["coder"] == "C2"
        clone = ExpectationCurveEstimator(**params)
        assert clone.get_params() == params
