"""Python interface to the warfarin dosing pipeline.

Thin wrappers over the compiled ``_warfarin_core`` module: every call takes a
config file path plus optional ``"section.key=value"`` overrides, runs the
C++ pipeline, and returns parsed dicts.
"""

from __future__ import annotations

import json
from typing import Any, Dict, List, Optional, Sequence

from _warfarin_core import (  # noqa: F401  (re-exported exception types)
    ConfigurationError,
    SimulationError,
)
import _warfarin_core as _core

__all__ = [
    "ConfigurationError",
    "SimulationError",
    "config_hash",
    "generate",
    "train",
    "evaluate",
    "distill",
    "compare",
]


def _overrides(overrides: Optional[Sequence[str]]) -> List[str]:
    return list(overrides) if overrides else []


def config_hash(config: str, overrides: Optional[Sequence[str]] = None) -> str:
    """Hash of the canonicalized configuration (embedded in every artifact)."""
    return _core.config_hash(config, _overrides(overrides))


def generate(config: str, out_csv: str, overrides: Optional[Sequence[str]] = None) -> int:
    """Sample the evaluation cohort to ``out_csv``; returns the cohort size."""
    return _core.generate(config, out_csv, _overrides(overrides))


def train(
    config: str,
    out_dir: str,
    overrides: Optional[Sequence[str]] = None,
    resume: str = "",
) -> Dict[str, Any]:
    """Train the dosing policy; returns a summary dict with checkpoint paths."""
    return json.loads(_core.train(config, out_dir, _overrides(overrides), resume))


def evaluate(
    config: str,
    policy: str,
    overrides: Optional[Sequence[str]] = None,
    per_patient: bool = False,
) -> Dict[str, Any]:
    """Evaluate one policy spec; returns the evaluation report as a dict.

    Policy specs: ``aurora``, ``intermountain``, ``fixed``,
    ``checkpoint:<path>``, ``table:<path>``.
    """
    return json.loads(_core.evaluate(config, policy, _overrides(overrides), per_patient))


def distill(
    config: str,
    checkpoint: str,
    out_dir: str,
    overrides: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """Distill a trained checkpoint into an INR-indexed dosing table."""
    return json.loads(_core.distill(config, checkpoint, out_dir, _overrides(overrides)))


def compare(
    config: str,
    policies: Sequence[str],
    overrides: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """Evaluate several policy specs on one shared cohort."""
    return json.loads(_core.compare(config, list(policies), _overrides(overrides)))
