from fractions import Fraction

import pytest

from siggame.beliefs import (
    BeliefState,
    InconsistentObservationError,
    LikelihoodPair,
    bayes_coefficient,
    bayes_update,
    type_conditional_likelihood,
)
from siggame.equilibrium import StrategyTree
from siggame.model import BENIGN, MALICIOUS


def exact_posterior(pi, p_b, p_m):
    """Rational-arithmetic oracle on the exact binary values of the inputs."""
    pi, p_b, p_m = Fraction(pi), Fraction(p_b), Fraction(p_m)
    denom = p_b * (1 - pi) + p_m * pi
    return float(p_m * pi / denom)


GRID = [i / 10 for i in range(11)]


class TestBayesUpdate:
    def test_known_value_low(self):
        out = bayes_update(BeliefState(0.1), LikelihoodPair(0.9, 0.8))
        assert out.pi_m == pytest.approx(0.08 / 0.89, abs=1e-12)

    def test_known_value_high(self):
        out = bayes_update(BeliefState(0.1), LikelihoodPair(0.1, 0.2))
        assert out.pi_m == pytest.approx(0.02 / 0.11, abs=1e-12)

    def test_equal_likelihoods_fix_point(self):
        assert bayes_update(BeliefState(0.1), LikelihoodPair(0.7, 0.7)).pi_m == 0.1

    def test_zero_prior_absorbing(self):
        assert bayes_update(BeliefState(0.0), LikelihoodPair(0.9, 0.8)).pi_m == 0.0

    def test_one_prior_absorbing(self):
        assert bayes_update(BeliefState(1.0), LikelihoodPair(0.9, 0.8)).pi_m == 1.0

    def test_inconsistent_observation_raises(self):
        with pytest.raises(InconsistentObservationError):
            bayes_update(BeliefState(0.5), LikelihoodPair(0.0, 0.0))
        with pytest.raises(InconsistentObservationError):
            bayes_update(BeliefState(1.0), LikelihoodPair(0.9, 0.0))

    def test_matches_rational_oracle_on_grid(self):
        for pi in GRID:
            for p_b in GRID:
                for p_m in GRID:
                    if p_b * (1 - pi) + p_m * pi == 0:
                        continue
                    got = bayes_update(BeliefState(pi), LikelihoodPair(p_b, p_m)).pi_m
                    assert got == pytest.approx(exact_posterior(pi, p_b, p_m), abs=1e-12)

    def test_monotone_in_likelihood_ratio(self):
        for pi in (0.1, 0.3, 0.5, 0.9):
            up = bayes_update(BeliefState(pi), LikelihoodPair(0.2, 0.4)).pi_m
            down = bayes_update(BeliefState(pi), LikelihoodPair(0.4, 0.2)).pi_m
            assert up > pi > down


class TestBayesCoefficient:
    def test_pooled_likelihoods_give_unit_factor(self):
        belief = BeliefState(0.3)
        lik = LikelihoodPair(0.6, 0.6)
        assert bayes_coefficient(belief, lik, BENIGN) == pytest.approx(1.0, abs=1e-15)
        assert bayes_coefficient(belief, lik, MALICIOUS) == pytest.approx(1.0, abs=1e-15)

    def test_known_values(self):
        belief, lik = BeliefState(0.1), LikelihoodPair(0.9, 0.8)
        assert bayes_coefficient(belief, lik, MALICIOUS) == pytest.approx(0.8 / 0.89, abs=1e-12)
        assert bayes_coefficient(belief, lik, BENIGN) == pytest.approx(0.9 / 0.89, abs=1e-12)

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError, match="unknown type"):
            bayes_coefficient(BeliefState(0.1), LikelihoodPair(0.5, 0.5), "other")

    def test_chain_rule_against_update(self):
        # f * pi must reproduce the update on both coordinates across the grid
        for pi in GRID[1:-1]:
            for p_b in GRID:
                for p_m in GRID:
                    if p_b * (1 - pi) + p_m * pi == 0:
                        continue
                    belief, lik = BeliefState(pi), LikelihoodPair(p_b, p_m)
                    updated = bayes_update(belief, lik).pi_m
                    f_m = bayes_coefficient(belief, lik, MALICIOUS)
                    f_b = bayes_coefficient(belief, lik, BENIGN)
                    assert f_m * pi == pytest.approx(updated, abs=1e-12)
                    assert f_b * (1 - pi) == pytest.approx(1 - updated, abs=1e-12)

    def test_complement_consistency(self):
        for pi in GRID[1:-1]:
            upd = bayes_update(BeliefState(pi), LikelihoodPair(0.25, 0.65))
            assert upd.pi_m + upd.pi_b == pytest.approx(1.0, abs=1e-12)


class TestValidation:
    def test_belief_range(self):
        with pytest.raises(ValueError):
            BeliefState(1.5)
        with pytest.raises(ValueError):
            BeliefState(-0.1)

    def test_likelihood_range(self):
        with pytest.raises(ValueError):
            LikelihoodPair(1.2, 0.5)


def one_step_profile(action_b, action_m, reaction):
    return StrategyTree(
        depth=1,
        sender={BENIGN: {(): action_b}, MALICIOUS: {(): action_m}},
        receiver={(): reaction},
    )


def two_step_profile(action_b, action_m, reaction):
    nodes = [(), ("x_n",), ("x_a",)]
    return StrategyTree(
        depth=2,
        sender={
            BENIGN: {n: action_b for n in nodes},
            MALICIOUS: {n: action_m for n in nodes},
        },
        receiver={n: reaction for n in nodes},
    )


class TestTypeConditionalLikelihood:
    def test_pooling_profile(self, table1):
        lik = type_conditional_likelihood(table1, one_step_profile("a_b", "a_b", "r_b"), ("x_n",), "x_n")
        assert (lik.p_b, lik.p_m) == (0.9, 0.9)

    def test_separating_profile(self, table1):
        lik = type_conditional_likelihood(table1, one_step_profile("a_b", "a_m", "r_b"), ("x_n",), "x_n")
        assert (lik.p_b, lik.p_m) == (0.9, 0.8)

    def test_deeper_history_uses_tree_node(self, table1):
        profile = two_step_profile("a_b", "a_m", "r_b")
        lik = type_conditional_likelihood(table1, profile, ("x_n", "x_a"), "x_a")
        assert (lik.p_b, lik.p_m) == (0.2, 0.3)

    def test_deterministic_rows(self, scenario_builder):
        scenario = scenario_builder(
            rows={
                ("x_n", "a_b"): (1.0, 0.0),
                ("x_a", "a_b"): (1.0, 0.0),
                ("x_n", "a_m"): (1.0, 0.0),
                ("x_a", "a_m"): (1.0, 0.0),
            },
            sender_util=lambda t, x, a, r: 0.0,
            receiver_util=lambda t, x, a, r: 0.0,
        )
        lik = type_conditional_likelihood(
            scenario, one_step_profile("a_b", "a_m", "r_b"), ("x_n",), "x_n"
        )
        assert (lik.p_b, lik.p_m) == (1.0, 1.0)

    def test_history_beyond_depth_errors(self, table1):
        with pytest.raises(ValueError, match="depth"):
            type_conditional_likelihood(
                table1, one_step_profile("a_b", "a_m", "r_b"), ("x_n", "x_a"), "x_n"
            )

    def test_empty_history_errors(self, table1):
        with pytest.raises(ValueError, match="root"):
            type_conditional_likelihood(table1, one_step_profile("a_b", "a_m", "r_b"), (), "x_n")
