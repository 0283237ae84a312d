"""Challenge metrics, endpoint k-means and model ensembling."""

from .clustering import CandidateSet, KMeansResult, ensemble_merge, kmeans, objective
from .metrics import MISS_THRESHOLD, ade_per_mode, brier_metrics, fde_per_mode, min_ade, min_fde, miss_rate, top_k
from .report import (METRICS, EvalReport, ScenarioMetrics, aggregate, column, evaluate, evaluate_predictions,
                     format_report, parse_report, scenario_metrics)

__all__ = [
    "CandidateSet", "EvalReport", "KMeansResult", "METRICS", "MISS_THRESHOLD", "ScenarioMetrics", "ade_per_mode",
    "aggregate", "brier_metrics", "column", "ensemble_merge", "evaluate", "evaluate_predictions", "fde_per_mode",
    "format_report", "kmeans", "min_ade", "min_fde", "miss_rate", "objective", "parse_report", "scenario_metrics",
    "top_k",
]
