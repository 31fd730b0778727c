"""Finite-horizon strategy trees, expected utilities, and equilibrium search.

A strategy tree assigns an action (per sender type) and a reaction to every
history node of a depth-T window; a node is the tuple of states realized below
the window root, so the root node is the empty tuple. Values of a joint tree
are exact expectations over all length-T state sequences from the current
state. The solver scans every joint pure profile for a mutual best response
and is re-run each step, receding-horizon style, applying only the root
prescriptions.

Within a window the sender's value for type t is the average of its
instantaneous utilities along type-t play; the receiver's value sums, over
both hypothesized types, path-probability-weighted utilities further weighted
by the belief trajectory, where the belief starts at the supplied value and is
propagated by Bayes' rule under the candidate profile itself.

Tie-breaking is lexicographic in enumeration order: trees are enumerated by
assigning labels (in alphabet order) to nodes ordered by depth then state
order, and joint profiles are scanned as (benign tree, malicious tree,
receiver tree) in that nesting. The same order decides which of several
equilibria is reported; multiplicity is never collapsed silently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .beliefs import BeliefState, MIN_MIXTURE
from .model import BENIGN, MALICIOUS, Alphabets, Scenario

# Refuse exhaustive scans beyond this many joint profiles.
JOINT_PROFILE_LIMIT = 10_000_000


class EnumerationLimitError(ValueError):
    """The joint profile space is too large to scan exhaustively."""


class NoPureEquilibriumError(RuntimeError):
    """No joint pure profile is a mutual best response.

    Carries the best-response cycle that witnesses non-existence, plus the
    defender-anchored approximate profile: among profiles where the receiver
    is exactly best-responding, the one minimizing the largest sender
    deviation gain (ties broken in enumeration order). ``fallback_regret`` is
    that largest gain; it is zero exactly when a pure equilibrium exists.
    """

    def __init__(self, message, cycle, fallback_profile, fallback_regret):
        super().__init__(message)
        self.cycle = cycle
        self.fallback_profile = fallback_profile
        self.fallback_regret = fallback_regret


@dataclass(frozen=True)
class StrategyTree:
    """Complete depth-T prescriptions: node -> action per sender type, and
    node -> reaction for the receiver."""

    depth: int
    sender: Mapping[str, Mapping[tuple[str, ...], str]]
    receiver: Mapping[tuple[str, ...], str]

    def root_prescriptions(self) -> tuple[str, str, str]:
        return (self.sender[BENIGN][()], self.sender[MALICIOUS][()], self.receiver[()])


@dataclass(frozen=True)
class EquilibriumResult:
    profile: StrategyTree
    sender_value_benign: float
    sender_value_malicious: float
    receiver_value: float
    multiplicity: int
    tie_broken: bool


def window_nodes(states: Iterable[str], depth: int) -> list[tuple[str, ...]]:
    """History nodes of a depth-``depth`` window, ordered by depth then state
    order; the root (empty history) comes first."""
    states = tuple(states)
    nodes: list[tuple] = []
    for d in range(depth):
        nodes.extend(itertools.product(states, repeat=d))
    return nodes


def joint_profile_count(alphabets: Alphabets, horizon: int) -> int:
    n_nodes = len(window_nodes(alphabets.states, horizon))
    return (len(alphabets.actions) ** n_nodes) ** 2 * len(alphabets.reactions) ** n_nodes


def enumerate_strategy_trees(
    alphabets: Alphabets, horizon: int
) -> tuple[dict[str, list[dict[tuple[str, ...], str]]], list[dict[tuple[str, ...], str]]]:
    """Exhaustive, duplicate-free tree sets: one list of sender branches per
    type and the list of receiver branches."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    total = joint_profile_count(alphabets, horizon)
    if total > JOINT_PROFILE_LIMIT:
        raise EnumerationLimitError(
            f"{total} joint profiles exceed the exhaustive-scan limit of {JOINT_PROFILE_LIMIT}"
        )
    nodes = window_nodes(alphabets.states, horizon)
    sender = [
        dict(zip(nodes, combo)) for combo in itertools.product(alphabets.actions, repeat=len(nodes))
    ]
    receiver = [
        dict(zip(nodes, combo))
        for combo in itertools.product(alphabets.reactions, repeat=len(nodes))
    ]
    return {BENIGN: sender, MALICIOUS: list(sender)}, receiver


class _Tables:
    """Index-form kernel and utility lookups for one scenario."""

    def __init__(self, scenario: Scenario):
        al = scenario.alphabets
        self.alphabets = al
        self.horizon = scenario.horizon
        ns, na, nr = len(al.states), len(al.actions), len(al.reactions)
        self.n_states = ns
        kernel = scenario.kernel
        self.P = [
            [
                [list(kernel.row(x, a, r)) for r in al.reactions]
                for a in al.actions
            ]
            for x in al.states
        ]
        def util(table, t):
            return [
                [[table[(t, x, a, r)] for r in al.reactions] for a in al.actions]
                for x in al.states
            ]

        self.US_b = util(scenario.utilities.sender, BENIGN)
        self.US_m = util(scenario.utilities.sender, MALICIOUS)
        self.UR_b = util(scenario.utilities.receiver, BENIGN)
        self.UR_m = util(scenario.utilities.receiver, MALICIOUS)


def _path_terms(tab, x0, pi, path, seq_b, seq_m, seq_r):
    """Contribution of one state path under one action/reaction assignment.

    Returns (w_b, mean_u_b, w_m, mean_u_m, receiver_term): the path weight and
    average sender utility per type, and the already-weighted receiver term.
    The belief is propagated along the path; endpoint beliefs are absorbing,
    and a vanishing mixture with the belief strictly inside (0, 1) implies
    both weights are zero, so the frozen belief never touches the value.
    """
    T = tab.horizon
    P, US_b, US_m, UR_b, UR_m = tab.P, tab.US_b, tab.US_m, tab.UR_b, tab.UR_m
    w_b = w_m = 1.0
    beta = pi
    u_b = u_m = 0.0
    r_b_sum = r_m_sum = 0.0
    x = x0
    for i in range(T):
        a_b = seq_b[i]
        a_m = seq_m[i]
        r = seq_r[i]
        u_b += US_b[x][a_b][r]
        u_m += US_m[x][a_m][r]
        r_b_sum += UR_b[x][a_b][r] * (1.0 - beta)
        r_m_sum += UR_m[x][a_m][r] * beta
        if i + 1 < T:
            nxt = path[i]
            p_b = P[x][a_b][r][nxt]
            p_m = P[x][a_m][r][nxt]
            w_b *= p_b
            w_m *= p_m
            if w_b == 0.0 and w_m == 0.0:
                return 0.0, 0.0, 0.0, 0.0, 0.0
            if p_b != p_m and 0.0 < beta < 1.0:
                denom = p_b * (1.0 - beta) + p_m * beta
                if denom > MIN_MIXTURE:
                    beta = p_m * beta / denom
            x = nxt
    return w_b, u_b / T, w_m, u_m / T, (w_b * r_b_sum + w_m * r_m_sum) / T


def _profile_sequences(profile, alphabets, path_labels, horizon):
    node_keys = [path_labels[:i] for i in range(horizon)]
    try:
        seq_b = tuple(alphabets.action_index(profile.sender[BENIGN][n]) for n in node_keys)
        seq_m = tuple(alphabets.action_index(profile.sender[MALICIOUS][n]) for n in node_keys)
        seq_r = tuple(alphabets.reaction_index(profile.receiver[n]) for n in node_keys)
    except KeyError as missing:
        raise ValueError(f"profile has no prescription at node {missing}") from None
    return seq_b, seq_m, seq_r


def expected_utilities(
    scenario: Scenario, profile: StrategyTree, belief: BeliefState, x_now: str
) -> tuple[float, float, float]:
    """Exact window values of one joint profile from (belief, x_now).

    Sums over every state sequence of length ``horizon`` starting at
    ``x_now``; each sequence is weighted by its kernel probability under the
    type-specific actions, the averaging divisor is the horizon, and the
    receiver sum weights each step by the belief propagated along the path.
    """
    if profile.depth != scenario.horizon:
        raise ValueError(
            f"profile depth {profile.depth} does not match scenario horizon {scenario.horizon}"
        )
    al = scenario.alphabets
    tab = _Tables(scenario)
    x0 = al.state_index(x_now)
    pi = belief.pi_m
    T = scenario.horizon
    v_b = v_m = v_r = 0.0
    for path in itertools.product(range(tab.n_states), repeat=T - 1):
        labels = tuple(al.states[i] for i in path)
        seq_b, seq_m, seq_r = _profile_sequences(profile, al, labels, T)
        w_b, mean_b, w_m, mean_m, recv = _path_terms(tab, x0, pi, path, seq_b, seq_m, seq_r)
        v_b += w_b * mean_b
        v_m += w_m * mean_m
        v_r += recv
    return v_b, v_m, v_r


class _Enumeration:
    """Index-form tree sets plus per-path projections, reusable across solves."""

    def __init__(self, alphabets: Alphabets, horizon: int):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        total = joint_profile_count(alphabets, horizon)
        if total > JOINT_PROFILE_LIMIT:
            raise EnumerationLimitError(
                f"{total} joint profiles exceed the exhaustive-scan limit of {JOINT_PROFILE_LIMIT}"
            )
        self.alphabets = alphabets
        self.horizon = horizon
        ns = len(alphabets.states)
        self.nodes = window_nodes(range(ns), horizon)
        node_pos = {node: i for i, node in enumerate(self.nodes)}
        n_nodes = len(self.nodes)
        self.sender_branches = list(itertools.product(range(len(alphabets.actions)), repeat=n_nodes))
        self.receiver_branches = list(
            itertools.product(range(len(alphabets.reactions)), repeat=n_nodes)
        )
        self.paths = list(itertools.product(range(ns), repeat=horizon - 1))
        path_node_pos = [
            tuple(node_pos[path[:i]] for i in range(horizon)) for path in self.paths
        ]
        self.sender_seqs = [
            [tuple(branch[p] for p in positions) for positions in path_node_pos]
            for branch in self.sender_branches
        ]
        self.receiver_seqs = [
            [tuple(branch[p] for p in positions) for positions in path_node_pos]
            for branch in self.receiver_branches
        ]

    def profile(self, ib: int, im: int, ir: int) -> StrategyTree:
        al = self.alphabets
        label_nodes = [tuple(al.states[i] for i in node) for node in self.nodes]
        branch_b = self.sender_branches[ib]
        branch_m = self.sender_branches[im]
        branch_r = self.receiver_branches[ir]
        return StrategyTree(
            depth=self.horizon,
            sender={
                BENIGN: {n: al.actions[a] for n, a in zip(label_nodes, branch_b)},
                MALICIOUS: {n: al.actions[a] for n, a in zip(label_nodes, branch_m)},
            },
            receiver={n: al.reactions[r] for n, r in zip(label_nodes, branch_r)},
        )


def _value_matrices(tab, enum, pi, x0):
    """Fill the sender value matrices and the receiver value tensor.

    Contributions are cached by the action/reaction sequences actually met
    along each path, which many trees share, so the heavy path walks shrink
    from (trees)^3 to (labels per path)^3.
    """
    nb = len(enum.sender_branches)
    nr = len(enum.receiver_branches)
    n_paths = len(enum.paths)
    V_b = np.empty((nb, nr))
    V_m = np.empty((nb, nr))
    V_r = np.empty((nb, nb, nr))
    cache: dict = {}
    paths = enum.paths
    sender_seqs = enum.sender_seqs
    receiver_seqs = enum.receiver_seqs
    for ib in range(nb):
        seqs_b = sender_seqs[ib]
        for im in range(nb):
            seqs_m = sender_seqs[im]
            for ir in range(nr):
                seqs_r = receiver_seqs[ir]
                v_b = v_m = v_r = 0.0
                for ipath in range(n_paths):
                    key = (ipath, seqs_b[ipath], seqs_m[ipath], seqs_r[ipath])
                    terms = cache.get(key)
                    if terms is None:
                        terms = _path_terms(
                            tab, x0, pi, paths[ipath], key[1], key[2], key[3]
                        )
                        cache[key] = terms
                    w_b, mean_b, w_m, mean_m, recv = terms
                    v_b += w_b * mean_b
                    v_m += w_m * mean_m
                    v_r += recv
                V_r[ib, im, ir] = v_r
                if im == 0:
                    V_b[ib, ir] = v_b
                if ib == 0:
                    V_m[im, ir] = v_m
    return V_b, V_m, V_r


def _best_response_cycle(V_b, V_m, V_r):
    """Iterate joint best responses from the first profile until a repeat."""
    seen: dict[tuple[int, int, int], int] = {}
    seq: list[tuple[int, int, int]] = []
    state = (0, 0, 0)
    while state not in seen:
        seen[state] = len(seq)
        seq.append(state)
        _, _, ir = state
        ib = int(np.argmax(V_b[:, ir]))
        im = int(np.argmax(V_m[:, ir]))
        state = (ib, im, int(np.argmax(V_r[ib, im, :])))
    return tuple(seq[seen[state]:])


def _solve(tab, enum, pi, x0) -> EquilibriumResult:
    V_b, V_m, V_r = _value_matrices(tab, enum, pi, x0)
    best_b = V_b.max(axis=0)
    best_m = V_m.max(axis=0)
    best_r = V_r.max(axis=2)
    eq_mask = (
        (V_b >= best_b)[:, None, :] & (V_m >= best_m)[None, :, :] & (V_r >= best_r[:, :, None])
    )
    count = int(eq_mask.sum())
    if count:
        ib, im, ir = (int(i) for i in np.argwhere(eq_mask)[0])
        return EquilibriumResult(
            profile=enum.profile(ib, im, ir),
            sender_value_benign=float(V_b[ib, ir]),
            sender_value_malicious=float(V_m[im, ir]),
            receiver_value=float(V_r[ib, im, ir]),
            multiplicity=count,
            tie_broken=count > 1,
        )
    regret_b = best_b - V_b
    regret_m = best_m - V_m
    regret_r = best_r[:, :, None] - V_r
    sender_regret = np.maximum(regret_b[:, None, :], regret_m[None, :, :])
    candidates = np.where(regret_r <= 0.0, sender_regret, np.inf)
    flat = int(np.argmin(candidates))
    fb = tuple(int(i) for i in np.unravel_index(flat, candidates.shape))
    cycle = _best_response_cycle(V_b, V_m, V_r)
    raise NoPureEquilibriumError(
        f"no pure mutual best response among {candidates.size} joint profiles "
        f"(best-response cycle of length {len(cycle)})",
        cycle=cycle,
        fallback_profile=enum.profile(*fb),
        fallback_regret=float(candidates[fb]),
    )


def solve_bne(scenario: Scenario, belief: BeliefState, x_now: str) -> EquilibriumResult:
    """Scan all joint pure profiles for a mutual best response.

    Each sender type's branch must be an argmax against the fixed receiver
    branch, and the receiver branch an argmax against the fixed sender
    branches, with every deviation valued by ``expected_utilities`` at the
    same (belief, x_now). The lexicographically first equilibrium in
    enumeration order is returned together with the total count found.

    Raises NoPureEquilibriumError when no profile passes; the error carries a
    witnessing best-response cycle and a deterministic approximate profile.
    """
    tab = _Tables(scenario)
    enum = _Enumeration(scenario.alphabets, scenario.horizon)
    return _solve(tab, enum, belief.pi_m, scenario.alphabets.state_index(x_now))


class RecedingHorizonPolicy:
    """Per-step decision rule: solve the window at (belief, state), keep roots.

    Results are memoized on the exact (belief, state) pair; the belief key is
    the full double, no quantization. When the scan proves no pure profile is
    a mutual best response the policy, by default, falls back to the
    defender-anchored approximate profile carried by the error (receiver
    exactly best-responding, sender regret minimized); pass
    ``resolve_missing=False`` to propagate the error instead.
    """

    def __init__(self, scenario: Scenario, resolve_missing: bool = True):
        self.scenario = scenario
        self.resolve_missing = resolve_missing
        self._tables = _Tables(scenario)
        self._enum = _Enumeration(scenario.alphabets, scenario.horizon)
        self._x_index: Callable[[str], int] = scenario.alphabets.state_index
        self._cache: dict[tuple[float, str], tuple[str, str, str]] = {}

    def decide(self, pi_m: float, state: str) -> tuple[str, str, str]:
        """Root prescriptions (benign action, malicious action, reaction)."""
        key = (pi_m, state)
        roots = self._cache.get(key)
        if roots is None:
            try:
                profile = _solve(self._tables, self._enum, pi_m, self._x_index(state)).profile
            except NoPureEquilibriumError as err:
                if not self.resolve_missing:
                    raise
                profile = err.fallback_profile
            roots = profile.root_prescriptions()
            self._cache[key] = roots
        return roots


def receding_horizon_policy(scenario: Scenario, resolve_missing: bool = True) -> RecedingHorizonPolicy:
    """Build the receding-horizon decision function for a scenario."""
    return RecedingHorizonPolicy(scenario, resolve_missing=resolve_missing)
