"""Convergence, agreement, and drift diagnostics over recorded trajectories.

These checks make the asymptotic claims about the closed loop measurable at
desk scale: the belief on the true type should drift upward (an exact
one-step inequality, checked by enumeration), settle without oscillation, and
either the Bayes factor pins to one or the belief decays to zero. The KL-rate
estimate is a heuristic predictor of how fast a belief decays between
distinguishable regimes; it is reported, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Sequence

from .beliefs import BeliefState, mixture_probability
from .model import MALICIOUS, Scenario

if TYPE_CHECKING:
    from .equilibrium import StrategyTree
    from .simulate import BatchSummary, Trajectory

DEFAULT_WINDOW = 20
DEFAULT_TOL = 0.01


class Classification(str, Enum):
    """Trailing-window verdict for one trajectory."""

    F_TO_ONE = "F_TO_ONE"
    PI_TO_ZERO = "PI_TO_ZERO"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class ConvergenceReport:
    limit_estimate: float
    oscillation: float
    classification: Classification
    window: int
    # Both events can hold at once; F_TO_ONE takes precedence and this flag
    # keeps the joint occurrence visible.
    pi_to_zero_also: bool = False


def submartingale_margin(
    scenario: Scenario,
    profile: "StrategyTree",
    history: Sequence[str],
    belief_at_history: BeliefState,
) -> float:
    """One-step conditional drift of the belief on the true type.

    Exact enumeration of successors of the last history state under the
    profile's root prescriptions: expected updated belief minus the current
    one, on the true type's coordinate and under its transition law.
    Successor states whose mixture probability vanishes are excluded; they
    carry no true-type probability whenever the current belief is positive.
    """
    if not history:
        raise ValueError("history must contain at least one state")
    if profile.depth < 1:
        raise ValueError("profile must cover at least one more step")
    x_now = history[-1]
    pi = belief_at_history.pi_m
    a_b, a_m, reaction = profile.root_prescriptions()
    row_b = scenario.kernel.row(x_now, a_b, reaction)
    row_m = scenario.kernel.row(x_now, a_m, reaction)
    malicious = scenario.true_type == MALICIOUS
    current = pi if malicious else 1.0 - pi
    expected = 0.0
    for p_b, p_m in zip(row_b, row_m):
        denom = mixture_probability(pi, p_b, p_m)
        if denom <= 0.0:
            continue
        posterior_m = p_m * pi / denom
        weight = p_m if malicious else p_b
        expected += weight * (posterior_m if malicious else 1.0 - posterior_m)
    return expected - current


def convergence_report(
    trajectory: "Trajectory", window: int = DEFAULT_WINDOW, tol: float = DEFAULT_TOL
) -> ConvergenceReport:
    """Trailing-window statistics of one episode's belief path.

    ``limit_estimate`` is the mean belief over the last ``window`` steps,
    ``oscillation`` the total variation over the same stretch. The episode is
    classified F_TO_ONE when the mean |f - 1| over the window is below
    ``tol``, PI_TO_ZERO when the limit estimate is, UNDECIDED otherwise.
    """
    beliefs = trajectory.beliefs
    coefficients = trajectory.coefficients
    if len(beliefs) <= window:
        raise ValueError(f"trajectory of {len(beliefs)} steps is shorter than window {window}")
    tail = beliefs[-window:]
    limit = math.fsum(tail) / window
    span = beliefs[-(window + 1):]
    oscillation = math.fsum(abs(b - a) for a, b in zip(span, span[1:]))
    f_flat = math.fsum(abs(f - 1.0) for f in coefficients[-window:]) / window < tol
    pi_zero = limit < tol
    if f_flat:
        classification = Classification.F_TO_ONE
    elif pi_zero:
        classification = Classification.PI_TO_ZERO
    else:
        classification = Classification.UNDECIDED
    return ConvergenceReport(
        limit_estimate=limit,
        oscillation=oscillation,
        classification=classification,
        window=window,
        pi_to_zero_also=f_flat and pi_zero,
    )


def agreement_series(trajectory: "Trajectory") -> tuple[list[int], int | None]:
    """Per-step action disagreement and the first sustained-agreement step.

    Returns the 0/1 distance series between the two types' prescriptions and
    the smallest 1-based step K such that the prescriptions agree from K to
    the end of the recording, or None when the last step still disagrees.
    """
    series = list(trajectory.agreement)
    last_disagree = None
    for i, d in enumerate(series):
        if d:
            last_disagree = i
    if last_disagree is None:
        return series, 1
    if last_disagree == len(series) - 1:
        return series, None
    return series, last_disagree + 2


def kl_decay_estimate(p_malicious: Sequence[float], p_benign: Sequence[float]) -> float:
    """KL divergence of the malicious next-state law from the benign one.

    Heuristic rate at which observations accumulate evidence against the
    hypothesis generating ``p_benign`` when data follow ``p_malicious``.
    Returns math.inf when the malicious law puts mass where the benign one
    has none (no absolute continuity), rather than raising.
    """
    p_m = [float(v) for v in p_malicious]
    p_b = [float(v) for v in p_benign]
    if len(p_m) != len(p_b) or not p_m:
        raise ValueError("distributions must be non-empty and of equal length")
    for name, dist in (("first", p_m), ("second", p_b)):
        if any(v < 0.0 for v in dist):
            raise ValueError(f"{name} distribution has a negative entry")
        if abs(math.fsum(dist) - 1.0) > 1e-9:
            raise ValueError(f"{name} distribution does not sum to 1")
    total = 0.0
    for q_m, q_b in zip(p_m, p_b):
        if q_m == 0.0:
            continue
        if q_b == 0.0:
            return math.inf
        total += q_m * math.log(q_m / q_b)
    return total


def random_walk_belief(p: float, k: int, pi0: float) -> float:
    """Closed-form belief after k balanced excursions of a two-state walk.

    With one type moving uniformly and the other with switch probability p,
    the belief at a time the empirical state counts balance equals
    pi0 / (alpha * (1 - pi0) + pi0) with alpha = (4 p (1 - p))**k. For any
    p != 1/2 this strictly exceeds pi0, so the belief cannot decay to zero
    along such walks.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if not 0.0 < pi0 < 1.0:
        raise ValueError(f"pi0 must lie strictly inside (0, 1), got {pi0}")
    alpha = (4.0 * p * (1.0 - p)) ** k
    if alpha == 1.0:
        # p = 1/2 makes the walk uninformative; return the prior untouched.
        return pi0
    return pi0 / (alpha * (1.0 - pi0) + pi0)


def detection_averse_check(
    batch: "BatchSummary", tol: float = DEFAULT_TOL
) -> tuple[bool, list[tuple[int, float]]]:
    """Check that no episode's belief limit reaches one.

    Requires a batch generated under the malicious type; an episode violates
    when its limit estimate exceeds 1 - tol (or when it failed outright).
    """
    if batch.true_type != MALICIOUS:
        raise ValueError("detection-averse check requires a malicious-type batch")
    violations: list[tuple[int, float]] = []
    for index, limit in enumerate(batch.limit_estimates):
        if limit is None or limit > 1.0 - tol:
            violations.append((index, math.nan if limit is None else limit))
    return (not violations, violations)
