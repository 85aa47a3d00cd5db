"""Python bindings for the CrossAdapt C++ core.

Arrays go in as anything numpy can convert to float64. Structured results
(plans, configs, run summaries) come back as plain dicts.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping

import numpy as np

from . import _core
from ._core import (
    CrossAdaptError,
    apply_plan as _apply_plan,
    auc,
    divergence,
    enhancement_ratio,
    logloss,
    ndcg_at_k,
    random_projection_baseline,
    spearman,
)

__all__ = [
    "CrossAdaptError",
    "apply_plan",
    "auc",
    "build_plan",
    "default_config",
    "divergence",
    "enhancement_ratio",
    "gram_error",
    "logloss",
    "ndcg_at_k",
    "pcvr_bias",
    "random_projection_baseline",
    "resolve_config",
    "run_modes",
    "shift_report",
    "spearman",
]


def _dump(obj: Mapping[str, Any] | str) -> str:
    return obj if isinstance(obj, str) else json.dumps(obj)


def build_plan(table, d_s: int, seed: int = 0) -> dict:
    """Copy, Expand or Reduce plan mapping a V x d_T table to d_s columns."""
    return json.loads(_core.build_plan(np.asarray(table, dtype=float), d_s, seed))


def apply_plan(table, plan: Mapping[str, Any]) -> np.ndarray:
    return _apply_plan(np.asarray(table, dtype=float), _dump(plan))


def gram_error(table, plan: Mapping[str, Any]) -> tuple[float, float]:
    """(measured, predicted) Gram error of a Reduce plan."""
    return _core.gram_error(np.asarray(table, dtype=float), _dump(plan))


def pcvr_bias(predicted_rates, actual_rates) -> dict:
    value, items, excluded = _core.pcvr_bias(predicted_rates, actual_rates)
    return {"value": value, "items": items, "excluded_items": excluded}


def default_config(profile: str = "desk") -> dict:
    return json.loads(_core.default_config(profile))


def resolve_config(config: Mapping[str, Any] | None = None, overrides: Iterable[str] = ()) -> dict:
    """Defaults, then `config`, then KEY=VALUE overrides, validated."""
    return json.loads(_core.resolve_config(_dump(config or {}), list(overrides)))


def run_modes(config: Mapping[str, Any] | None = None, overrides: Iterable[str] = ()) -> list[dict]:
    """Every configured mode for every seed; one summary per run."""
    return json.loads(_core.run_modes(_dump(config or {}), list(overrides)))


def shift_report(config: Mapping[str, Any] | None = None, overrides: Iterable[str] = ()) -> dict:
    """Windowed shift report over the train split."""
    return json.loads(_core.shift_report(_dump(config or {}), list(overrides)))
