"""Dataset-level evaluation and the tab-separated report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import EmptyDataset, ParseError
from ..geometry import from_agent_frame
from ..scenario import OBJECT_TYPES, Scenario
from .metrics import MISS_THRESHOLD, ade_per_mode, fde_per_mode, top_k

METRICS = ("minADE", "minFDE", "MR", "brier_minADE", "brier_minFDE")
DEFAULT_K = (1, 6)


@dataclass(frozen=True)
class ScenarioMetrics:
    scenario_id: str
    object_type: str
    values: dict[int, dict[str, float]]


@dataclass(frozen=True)
class EvalReport:
    """Mean metrics per category (``"all"`` first, then object types in canonical order)."""

    k_values: tuple[int, ...]
    rows: dict[str, dict[str, float]]   # category -> "minADE@K6" -> value
    counts: dict[str, int]
    per_scenario: tuple[ScenarioMetrics, ...] = field(default=(), compare=False)

    def get(self, category: str, metric: str, k: int) -> float:
        return self.rows[category][column(metric, k)]

    def categories(self) -> list[str]:
        return list(self.rows)


def column(metric: str, k: int) -> str:
    return f"{metric}@K{k}"


def scenario_metrics(traj, probs, gt, mask, k_values=DEFAULT_K, threshold=MISS_THRESHOLD) -> dict[int, dict[str, float]]:
    """Metrics of one forecast for each K (top-K most probable modes)."""
    probs = np.asarray(probs, dtype=np.float64)
    probs = probs / math.fsum(probs)
    out = {}
    for k in k_values:
        idx = top_k(probs, k)
        ade = ade_per_mode(np.asarray(traj)[idx], gt, mask)
        fde = fde_per_mode(np.asarray(traj)[idx], gt, mask)
        p = probs[idx]
        ia, jf = int(np.argmin(ade)), int(np.argmin(fde))
        out[k] = {
            "minADE": float(ade[ia]),
            "minFDE": float(fde[jf]),
            "MR": 1.0 if fde[jf] > threshold else 0.0,
            "brier_minADE": float(ade[ia]) + (1.0 - float(p[ia])) ** 2,
            "brier_minFDE": float(fde[jf]) + (1.0 - float(p[jf])) ** 2,
        }
    return out


def aggregate(per_scenario: Sequence[ScenarioMetrics], k_values=DEFAULT_K) -> EvalReport:
    if not per_scenario:
        raise EmptyDataset("nothing to evaluate")
    groups: dict[str, list[ScenarioMetrics]] = {"all": list(per_scenario)}
    for t in OBJECT_TYPES:
        members = [m for m in per_scenario if m.object_type == t]
        if members:
            groups[t] = members
    rows, counts = {}, {}
    for cat, members in groups.items():
        counts[cat] = len(members)
        rows[cat] = {
            column(metric, k): math.fsum(m.values[k][metric] for m in members) / len(members)
            for k in k_values for metric in METRICS
        }
    return EvalReport(tuple(k_values), rows, counts, tuple(per_scenario))


def evaluate_predictions(dataset: Sequence[Scenario], predictions: Mapping[str, tuple[np.ndarray, np.ndarray]],
                         k_values=DEFAULT_K) -> EvalReport:
    """Evaluate world-frame ``{scenario_id: (trajectories, probabilities)}``.

    Every scenario in ``dataset`` needs a prediction.
    """
    if not dataset:
        raise EmptyDataset("nothing to evaluate")
    per = []
    for s in dataset:
        if s.scenario_id not in predictions:
            raise KeyError(f"no prediction for scenario {s.scenario_id!r}")
        traj, probs = predictions[s.scenario_id]
        gt, mask = s.focal_future()
        per.append(ScenarioMetrics(s.scenario_id, s.focal.object_type,
                                   scenario_metrics(traj, probs, gt, mask, k_values)))
    return aggregate(per, k_values)


def evaluate(dataset: Sequence[Scenario], predictor: Callable, k_values=DEFAULT_K) -> EvalReport:
    """Run ``predictor(scenario) -> ForecastOutput`` (focal frame) over the dataset."""
    if not dataset:
        raise EmptyDataset("nothing to evaluate")
    preds = {}
    for s in dataset:
        out = predictor(s)
        preds[s.scenario_id] = (from_agent_frame(out.trajectories, s.focal_reference()), out.probabilities)
    return evaluate_predictions(dataset, preds, k_values)


def format_report(report: EvalReport) -> str:
    """Tab-separated category x metric table, a blank line, then key=value lines."""
    cols = [column(m, k) for k in report.k_values for m in METRICS]
    lines = ["\t".join(["category", "count"] + cols)]
    for cat, row in report.rows.items():
        lines.append("\t".join([cat, str(report.counts[cat])] + ["%.6f" % row[c] for c in cols]))
    lines.append("")
    for cat, row in report.rows.items():
        lines.append(f"{cat}.count={report.counts[cat]}")
        for k in report.k_values:
            for m in METRICS:
                lines.append(f"{cat}.K{k}.{m}={row[column(m, k)]!r}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, float]:
    """Machine-readable block of a report as ``{"all.K6.minADE": value, ...}``."""
    head, sep, block = text.partition("\n\n")
    if not sep:
        raise ParseError("report has no key=value block")
    out = {}
    for lineno, line in enumerate(block.splitlines(), 1):
        if not line.strip():
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ParseError(f"bad report line {line!r}", lineno)
        out[key] = float(value)
    return out
