"""Configuration bundle loading for the CLI, simulator and limit service.

A bundle is one JSON document carrying the safety curves, the per-condition
expectation curves, and optionally an arm model plus contact geometry.  The
environment variable ``EMU_CONFIG`` names the default bundle path.

The shipped demo bundle contains clearly synthetic numbers for demonstration
only; real deployments must supply their own safety curves.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .dynamics import ArmModel
from .errors import ConfigurationError
from .governor import ConditionPolicy, Governor, DEFAULT_MAX_ACCEL
from .smu import SafetyCurveSet

ENV_CONFIG = "EMU_CONFIG"


@dataclass(frozen=True, eq=False)
class ConfigBundle:
    """Everything the governor-side tools need, loaded and validated."""

    safety_curves: SafetyCurveSet
    policy: ConditionPolicy
    arm: ArmModel | None = None
    contact_direction: tuple = (0.0, 1.0, 0.0)
    contact_point: tuple = (0.0, 0.0, 0.0)
    max_accel: float = DEFAULT_MAX_ACCEL

    def governor(self) -> Governor:
        return Governor(self.safety_curves, self.policy)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ConfigBundle":
        try:
            curves = SafetyCurveSet.from_dict(doc["safety_curves"])
        except KeyError:
            raise ConfigurationError("bundle is missing 'safety_curves'") from None
        try:
            policy = ConditionPolicy.from_dict(
                {
                    "curves": doc["expectation_curves"],
                    "default_condition": doc.get("default_condition", "attentive"),
                }
            )
        except KeyError:
            raise ConfigurationError("bundle is missing 'expectation_curves'") from None
        arm = None
        if doc.get("arm_model") is not None:
            arm = ArmModel.from_dict(doc["arm_model"])
        return cls(
            safety_curves=curves,
            policy=policy,
            arm=arm,
            contact_direction=tuple(doc.get("contact_direction", (0.0, 1.0, 0.0))),
            contact_point=tuple(doc.get("contact_point", (0.0, 0.0, 0.0))),
            max_accel=float(doc.get("max_accel", DEFAULT_MAX_ACCEL)),
        )


def load_bundle(path: str | os.PathLike | None = None) -> ConfigBundle:
    """Load a bundle from ``path``, falling back to $EMU_CONFIG."""
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        raise ConfigurationError(
            f"no configuration given: pass --config or set ${ENV_CONFIG}"
        )
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    return ConfigBundle.from_dict(doc)


def demo_config_path(name: str = "demo_bundle.json") -> Path:
    """Path to one of the packaged demo configuration files."""
    path = resources.files("emu_safety") / "configs" / name
    return Path(str(path))
