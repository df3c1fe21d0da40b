"""Score fusion, threshold calibration and verdicts.

The fused score is a fact-likelihood: higher means more likely factual, and
a triple is a fact iff its score reaches the threshold.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import CalibrationError, ContractError
from .metrics import Label, metrics
from .types import CalibrationResult, Objective, TripleScoreCard, Verdict


def fuse(s_h: float, s_r: float, s_t: float, c_norm: float,
         weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0)) -> float:
    w1, w2, w3, w4 = weights
    return w1 * s_h + w2 * s_r + w3 * s_t + w4 * c_norm


def fuse_available(s_h: Optional[float], s_r: Optional[float], s_t: Optional[float],
                   c_norm: float, weights: Sequence[float] = (1.0, 1.0, 1.0, 1.0)) -> float:
    """Fuse with skipped task scores (None) left out.

    The remaining weights are rescaled so that they keep their original total,
    which keeps fused scores of complete and partial cards on one scale.
    """
    terms = [s_h, s_r, s_t, c_norm]
    present = [i for i, x in enumerate(terms) if x is not None]
    if len(present) == 4:
        return fuse(s_h, s_r, s_t, c_norm, weights)
    total = sum(weights)
    kept = sum(weights[i] for i in present)
    scale = total / kept if kept else 0.0
    return sum(weights[i] * scale * terms[i] for i in present)


def verdict_triple(fused: float, tau: float) -> Verdict:
    return Verdict.FACT if fused >= tau else Verdict.HALLUCINATION


def verdict_response(cards: Sequence[TripleScoreCard], rho: float = 0.0) -> Verdict:
    """Hallucination iff the share of hallucinated triples exceeds ``rho``."""
    if not cards:
        return Verdict.UNDECIDED
    bad = sum(1 for c in cards if c.verdict is Verdict.HALLUCINATION)
    return Verdict.HALLUCINATION if bad / len(cards) > rho else Verdict.FACT


def response_score(fused: Sequence[float], rho: float = 0.0) -> float:
    """Response-level fact score consistent with :func:`verdict_response`.

    The response is a hallucination iff more than ``rho * m`` of its m triple
    scores fall below the threshold, i.e. iff the k-th smallest score is
    below it, with k = floor(rho * m) + 1. That k-th smallest score is
    returned (``inf`` when k > m, which no threshold can condemn).
    """
    if not fused:
        raise ContractError("a response without triples has no score")
    ordered = sorted(fused)
    m = len(ordered)
    # Same float expression as verdict_response, so the two never disagree on rounding.
    k = next((b for b in range(1, m + 1) if b / m > rho), None)
    if k is None:
        return math.inf
    return ordered[k - 1]


def _objective_value(scores: np.ndarray, labels: Sequence[Label], tau: float, objective: Objective) -> float:
    preds = [Verdict.FACT if s >= tau else Verdict.HALLUCINATION for s in scores]
    m = metrics(preds, labels)
    return m.f1 if objective is Objective.F1 else m.accuracy


def calibrate(
    scores: Sequence[float],
    labels: Sequence[Label],
    objective: Objective = Objective.F1,
    grid_size: int = 256,
) -> CalibrationResult:
    """Pick the threshold in [mean, mean + 3 std] that maximizes ``objective``.

    ``grid_size`` evenly spaced candidates are evaluated; ties go to the
    smaller threshold. The standard deviation is the population one.
    """
    objective = Objective(objective)
    if len(scores) < 2:
        raise CalibrationError(f"calibration needs at least 2 scores, got {len(scores)}")
    if len(scores) != len(labels):
        raise CalibrationError("scores and labels are not aligned")
    if grid_size < 1:
        raise CalibrationError("grid_size must be >= 1")
    arr = np.asarray(scores, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        raise CalibrationError("no finite scores to calibrate on")
    if finite.min() == finite.max():
        # Exact, rather than a mean and spread polluted by rounding.
        mu, sigma = float(finite[0]), 0.0
    else:
        mu, sigma = float(finite.mean()), float(finite.std())
    if sigma == 0.0 or grid_size == 1:
        candidates = [mu]
    else:
        candidates = [float(x) for x in np.linspace(mu, mu + 3.0 * sigma, grid_size)]
    grid = [(tau, _objective_value(arr, labels, tau, objective)) for tau in candidates]
    best_tau, best_val = grid[0]
    for tau, val in grid[1:]:
        if val > best_val:
            best_tau, best_val = tau, val
    return CalibrationResult(mu, sigma, best_tau, objective, tuple(grid))
