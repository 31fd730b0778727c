import itertools

import pytest

from siggame.model import TYPES, Alphabets, Scenario, TransitionKernel, UtilityTables
from siggame.scenario_io import load_scenario, resolve_config_path


@pytest.fixture(scope="session")
def table1():
    return load_scenario(resolve_config_path("table1"))


@pytest.fixture(scope="session")
def table4():
    return load_scenario(resolve_config_path("table4"))


def build_binary_scenario(
    rows,
    sender_util,
    receiver_util,
    prior=0.1,
    initial_state="x_n",
    true_type="malicious",
    horizon=1,
    episode_length=50,
    base_seed=7,
):
    """Assemble a two-state/two-action/two-reaction scenario from callables.

    ``rows`` maps (state, action) -> probability pair (reaction independent);
    the utility callables take (type, state, action, reaction).
    """
    alphabets = Alphabets(
        states=("x_n", "x_a"), actions=("a_b", "a_m"), reactions=("r_b", "r_m")
    )
    table = {}
    for (x, a), vec in rows.items():
        for r in alphabets.reactions:
            table[(x, a, r)] = tuple(vec)
    keys = list(itertools.product(TYPES, alphabets.states, alphabets.actions, alphabets.reactions))
    utilities = UtilityTables(
        sender={k: float(sender_util(*k)) for k in keys},
        receiver={k: float(receiver_util(*k)) for k in keys},
    )
    return Scenario(
        alphabets=alphabets,
        kernel=TransitionKernel(alphabets=alphabets, table=table),
        utilities=utilities,
        initial_state=initial_state,
        prior=prior,
        true_type=true_type,
        horizon=horizon,
        episode_length=episode_length,
        base_seed=base_seed,
    )


@pytest.fixture
def scenario_builder():
    return build_binary_scenario
