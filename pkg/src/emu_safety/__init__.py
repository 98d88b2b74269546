"""Human-aware velocity limiting from coded reaction-trial data.

The pipeline: coded approach trials -> velocity-distance risk matrix for
involuntary-motion occurrence -> linear expectation curve at a threshold q_r
-> real-time governor that commands min(nominal, SMU, EMU) velocity, where the
SMU limit derives from the arm's reflected mass and configured safety curves.
"""

from .config import ConfigBundle, demo_config_path, load_bundle
from .dynamics import (
    INFINITE_MASS,
    ArmModel,
    Joint,
    Link,
    forward_kinematics,
    jacobian,
    link_frames,
    mass_matrix,
    reflected_mass,
)
from .errors import (
    BinCoverageError,
    ConfigurationError,
    CurveFitError,
    EmptyMatrixError,
    EmuSafetyError,
    MissingCurveError,
    ModelError,
    PolicyError,
    StallError,
    TrialFormatError,
    UnknownCueError,
)
from .governor import (
    ConditionPolicy,
    Governor,
    GovernorDecision,
    GovernorInput,
    SlewLimiter,
    compose_limits,
    v_safe,
)
from .risk import (
    NO_LIMIT,
    ExpectationCurve,
    RiskCell,
    RiskMatrix,
    build_risk_matrix,
    eval_expectation,
    fit_expectation_curve,
    proxemic_zone,
    threshold_crossings,
)
from .simulator import ApproachScenario, SimTrace, export_trace, parse_trace, run_approach
from .smu import SafetyCurve, SafetyCurveSet, v_smu
from .trials import (
    AnnotationPair,
    CUE_CODES,
    CueCode,
    TrialRecord,
    cohen_kappa,
    cue_counts_by_trial_index,
    first_trial_outlier,
    kappa_band,
    kappa_report,
    merge_imo_by_trial,
    pair_coders,
    parse_trials,
    serialize_trials,
)

__version__ = "0.1.0"


def __getattr__(name):
    # the estimator drags in scikit-learn; load it only when actually used
    if name == "ExpectationCurveEstimator":
        from .estimator import ExpectationCurveEstimator

        return ExpectationCurveEstimator
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
