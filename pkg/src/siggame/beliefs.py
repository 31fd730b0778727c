"""Bayes-rule tracking of the defender's belief that the sender is malicious.

The belief is a single scalar (probability of the malicious type); the benign
coordinate is its complement. Updates follow Bayes' rule whenever the mixed
observation likelihood is positive and raise otherwise: an observation that is
impossible under the current belief mixture has no defined posterior, and a
silently invented one would corrupt every downstream diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .model import BENIGN, MALICIOUS

if TYPE_CHECKING:
    from .equilibrium import StrategyTree
    from .model import Scenario

# Below this mixed likelihood the update is treated as undefined.
MIN_MIXTURE = 1e-300


class InconsistentObservationError(ValueError):
    """The observation has probability ~0 under the current belief mixture."""


@dataclass(frozen=True)
class BeliefState:
    """Probability assigned to the malicious type; benign gets the rest."""

    pi_m: float

    def __post_init__(self):
        if not 0.0 <= self.pi_m <= 1.0:
            raise ValueError(f"belief must lie in [0, 1], got {self.pi_m}")

    @property
    def pi_b(self) -> float:
        return 1.0 - self.pi_m


@dataclass(frozen=True)
class LikelihoodPair:
    """Next-state likelihood under each type's prescribed play."""

    p_b: float
    p_m: float

    def __post_init__(self):
        for name, p in (("p_b", self.p_b), ("p_m", self.p_m)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")


def mixture_probability(pi_m: float, p_b: float, p_m: float) -> float:
    """Predictive probability of the observation under the belief mixture.

    Equal likelihoods collapse to the common value exactly; the general
    expression would re-round it through (1 - pi) + pi.
    """
    if p_b == p_m:
        return p_b
    return p_b * (1.0 - pi_m) + p_m * pi_m


def posterior_malicious(pi_m: float, p_b: float, p_m: float) -> float:
    """Scalar core of the Bayes update; raises on an impossible observation.

    An uninformative observation (equal likelihoods) returns the belief
    bit-identically, so pooled play freezes the belief exactly.
    """
    denom = mixture_probability(pi_m, p_b, p_m)
    if denom <= MIN_MIXTURE:
        raise InconsistentObservationError(
            f"observation impossible under belief {pi_m} with likelihoods ({p_b}, {p_m})"
        )
    if p_b == p_m:
        return pi_m
    return p_m * pi_m / denom


def coefficient_value(pi_m: float, p_b: float, p_m: float, malicious: bool) -> float:
    """Multiplicative Bayes factor for one hypothesized type."""
    denom = mixture_probability(pi_m, p_b, p_m)
    if denom <= MIN_MIXTURE:
        raise InconsistentObservationError(
            f"observation impossible under belief {pi_m} with likelihoods ({p_b}, {p_m})"
        )
    if p_b == p_m:
        return 1.0
    return (p_m if malicious else p_b) / denom


def bayes_update(belief: BeliefState, lik: LikelihoodPair) -> BeliefState:
    """Posterior after one observation.

    Zero beliefs are absorbing: a prior of exactly 0 or 1 can never move,
    since the matching coefficient is then identically 1 whenever the update
    is defined at all.
    """
    return BeliefState(posterior_malicious(belief.pi_m, lik.p_b, lik.p_m))


def bayes_coefficient(belief: BeliefState, lik: LikelihoodPair, hat_type: str) -> float:
    """Bayes factor f for ``hat_type``: the updated belief equals f times the
    current one, coordinatewise."""
    if hat_type not in (BENIGN, MALICIOUS):
        raise ValueError(f"unknown type {hat_type!r}")
    return coefficient_value(belief.pi_m, lik.p_b, lik.p_m, hat_type == MALICIOUS)


def type_conditional_likelihood(
    scenario: "Scenario",
    profile: "StrategyTree",
    history: Sequence[str],
    x_next: str,
) -> LikelihoodPair:
    """Likelihood of ``x_next`` under each type's prescribed action.

    ``history`` lists the states observed inside the current window, first
    entry the window root. Past actions and reactions are pinned by the
    profile, so the window history reduces to this state sequence: the profile
    node is ``history[1:]`` and must lie strictly inside the tree depth.
    """
    if not history:
        raise ValueError("history must contain at least the window root state")
    node = tuple(history[1:])
    if len(node) >= profile.depth:
        raise ValueError(
            f"history of length {len(history)} runs past a depth-{profile.depth} profile"
        )
    x_now = history[-1]
    reaction = profile.receiver[node]
    row_b = scenario.kernel.row(x_now, profile.sender[BENIGN][node], reaction)
    row_m = scenario.kernel.row(x_now, profile.sender[MALICIOUS][node], reaction)
    j = scenario.alphabets.state_index(x_next)
    return LikelihoodPair(row_b[j], row_m[j])
