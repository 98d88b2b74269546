"""sklearn-compatible estimator facade over the risk-model pipeline.

Kept in its own module so command-line entry points that never fit curves do
not pay the scikit-learn import cost.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .risk import NO_LIMIT, build_risk_matrix, fit_expectation_curve, threshold_crossings
from .trials import MERGE_EITHER_CODER, TrialRecord


class ExpectationCurveEstimator(BaseEstimator):
    """Learn a distance-to-velocity limit from coded approach trials.

    ``fit`` consumes a sequence of :class:`~emu_safety.trials.TrialRecord` and
    runs the matrix -> crossings -> envelope pipeline; ``predict`` maps
    distances to velocity limits (``inf`` where the curve does not apply).
    Composes with sklearn tooling via ``get_params``/``set_params``.
    """

    def __init__(
        self,
        q_r: float = 0.15,
        d_max: float = 0.30,
        distance_bin_width: float = 0.05,
        velocity_bin_width: float = 0.05,
        exclude_first_trial: bool = True,
        merge_policy: str = MERGE_EITHER_CODER,
        coder: str | None = None,
    ):
        self.q_r = q_r
        self.d_max = d_max
        self.distance_bin_width = distance_bin_width
        self.velocity_bin_width = velocity_bin_width
        self.exclude_first_trial = exclude_first_trial
        self.merge_policy = merge_policy
        self.coder = coder

    def fit(self, X: Sequence[TrialRecord], y=None) -> "ExpectationCurveEstimator":
        """Build the risk matrix from trial records and fit the envelope."""
        self.risk_matrix_ = build_risk_matrix(
            X,
            exclude_first_trial=self.exclude_first_trial,
            distance_bin_width=self.distance_bin_width,
            velocity_bin_width=self.velocity_bin_width,
            merge_policy=self.merge_policy,
            coder=self.coder,
        )
        self.crossings_ = threshold_crossings(self.risk_matrix_, self.q_r)
        self.curve_ = fit_expectation_curve(self.crossings_, self.q_r, self.d_max)
        return self

    def predict(self, X) -> np.ndarray:
        """Velocity limits for an array of distances (inf beyond d_max)."""
        check_is_fitted(self, "curve_")
        d = np.asarray(X, dtype=float).ravel()
        if (d < 0).any():
            raise ValueError("distances must be >= 0")
        c = self.curve_
        return np.where(d <= c.d_max, c.a * d + c.b, NO_LIMIT)
