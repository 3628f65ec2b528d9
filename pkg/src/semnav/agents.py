"""Episode loops: the belief-planning agent ("leaps") and its baselines.

All agents share the same sub-policy machinery and step accounting; they
differ only in how the next macro-move target is chosen. Every episode is a
pure function of (model, house, start, goal, config, seed).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import EPS, BeliefState, SemanticModel, update_beliefs
from .planner import (
    Plan,
    _best_plan_from_sources,
    mask_to_vector,
    samples_from_or,
)
from .world import (
    NONE_TYPE,
    ExtractorNoise,
    HouseContext,
    SubPolicyProfile,
    _noisy_tick,
    optimal_plan_steps,
    step_subpolicy,
)

AGENT_KINDS = ("leaps", "random", "pure_subpolicy", "oracle_graph")


@dataclass
class AgentConfig:
    """Parameters shared by every agent kind.

    `replan_interval` and `horizon` are primitive-step counts; the profile's
    steps_per_move converts them to macro-moves. `noise` switches the agent's
    observations from the oracle signals to the noisy extractor channel.
    """

    kind: str = "leaps"
    replan_interval: int = 30
    horizon: int = 300
    profile: SubPolicyProfile = field(default_factory=SubPolicyProfile)
    noise: ExtractorNoise | None = None
    negatives: str = "xor"
    carry_belief: bool = False

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if not 1 <= self.replan_interval <= self.horizon:
            raise ValueError("need 1 <= replan_interval <= horizon")


@dataclass(frozen=True)
class WindowRecord:
    """One decision window: the plan in force, the window's bit-OR aggregate,
    the samples folded into the belief, and the post-update belief digest."""

    step: int
    s_s: tuple[int, ...]
    B: tuple[int, ...]
    plan: Plan
    sub_target: int
    samples: tuple[tuple[tuple[int, int], int], ...]
    belief_digest: str

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "s_s": list(self.s_s),
            "B": list(self.B),
            "plan": {
                "tau": list(self.plan.tau),
                "score": self.plan.score,
                "sub_target": self.plan.sub_target,
            },
            "sub_target": self.sub_target,
            "samples": [[list(edge), y] for edge, y in self.samples],
            "belief_digest": self.belief_digest,
        }


@dataclass
class EpisodeResult:
    success: bool
    steps: int
    goal: int
    optimal_plan_steps: int | None
    geodesic_distance: int | None
    trace: list[WindowRecord] = field(default_factory=list)


def oracle_belief(model: SemanticModel, house: HouseContext) -> BeliefState:
    """Belief state pinned to the house's true type-level structure: an edge
    is 1-EPS when some adjacent room pair carries those two signals, EPS
    otherwise; containment likewise."""
    n = model.vocab.n_nodes
    none_node = model.vocab.none_index
    belief = np.full((n, n), EPS, dtype=float)
    for a, b in house.adjacency:
        ta = house.room_types[a] if house.room_types[a] != NONE_TYPE else none_node
        tb = house.room_types[b] if house.room_types[b] != NONE_TYPE else none_node
        if ta != tb:
            belief[ta, tb] = belief[tb, ta] = 1.0 - EPS
    state = BeliefState.from_model(model)
    state.belief = belief
    if state.obj_belief is not None:
        obj = np.full_like(state.obj_belief, EPS)
        for t, r in house.objects:
            rt = house.room_types[r] if house.room_types[r] != NONE_TYPE else none_node
            obj[rt, t] = 1.0 - EPS
        state.obj_belief = obj
    return state


class _Observer:
    """Produces the agent's per-macro-move signal vector. With noise, the
    extractor ticks once per primitive step and the move's vector is the OR
    of the confirmed ticks; the confirmation history spans room changes."""

    def __init__(self, house: HouseContext, noise: ExtractorNoise | None, rng: random.Random):
        self.house = house
        self.noise = noise
        self.rng = rng
        if noise is not None:
            self.fp, self.fn = noise.rates(house.n_signals)
            self.history: deque[int] = deque()

    def observe(self, room: int, ticks: int) -> int:
        true_mask = self.house.signal_masks[room]
        if self.noise is None:
            return true_mask
        out = 0
        for _ in range(ticks):
            out |= _noisy_tick(
                true_mask,
                self.house.n_signals,
                self.fp,
                self.fn,
                self.noise.window,
                self.history,
                self.rng,
            )
        return out


def _goal_satisfied(house: HouseContext, room: int, goal: int) -> bool:
    return bool((house.signal_masks[room] >> goal) & 1)


def run_leaps_episode(
    model: SemanticModel,
    house: HouseContext,
    start: int,
    goal: int,
    config: AgentConfig,
    rng: random.Random,
    belief: BeliefState | None = None,
) -> EpisodeResult:
    """Belief-update / plan / execute loop. Pass `belief` to carry one across
    episodes (config.carry_belief); by default each episode starts from the
    model prior."""
    if belief is None:
        belief = BeliefState.from_model(model)
    return _run_planned_episode(model, house, start, goal, config, rng, belief, update=True)


def run_baseline_episode(
    kind: str,
    model: SemanticModel | None,
    house: HouseContext,
    start: int,
    goal: int,
    config: AgentConfig,
    rng: random.Random,
) -> EpisodeResult:
    """random: uniform walk for the horizon. pure_subpolicy: the goal's
    sub-policy throughout. oracle_graph: the planning loop on the house's
    true type graph (upper bound; no belief updates)."""
    if kind == "oracle_graph":
        if model is None:
            raise ValueError("oracle_graph needs a model for its vocabulary")
        return _run_planned_episode(
            model, house, start, goal, config, rng, oracle_belief(model, house), update=False
        )
    if kind == "random":
        return _run_reactive_episode(house, start, goal, config, rng, toward_goal=False)
    if kind == "pure_subpolicy":
        return _run_reactive_episode(house, start, goal, config, rng, toward_goal=True)
    raise ValueError(f"unknown baseline kind {kind!r}")


def run_episode(
    config: AgentConfig,
    model: SemanticModel | None,
    house: HouseContext,
    start: int,
    goal: int,
    seed: int,
) -> EpisodeResult:
    rng = random.Random(seed)
    if config.kind == "leaps":
        if model is None:
            raise ValueError("leaps agent needs a model")
        return run_leaps_episode(model, house, start, goal, config, rng)
    return run_baseline_episode(config.kind, model, house, start, goal, config, rng)


def _distances(house: HouseContext, start: int, goal: int, spm: int):
    opt = optimal_plan_steps(house, start, goal)
    return opt, None if opt is None else opt * spm


def _run_reactive_episode(
    house: HouseContext,
    start: int,
    goal: int,
    config: AgentConfig,
    rng: random.Random,
    toward_goal: bool,
) -> EpisodeResult:
    spm = config.profile.steps_per_move
    max_moves = config.horizon // spm
    opt, geo = _distances(house, start, goal, spm)
    room = start
    steps = 0
    if _goal_satisfied(house, room, goal):
        return EpisodeResult(True, 0, goal, opt, geo)
    stay = config.profile.undirected_stay
    for _ in range(max_moves):
        if toward_goal:
            room, cost = step_subpolicy(house, room, goal, config.profile, rng)
        else:
            nbrs = house.neighbors[room]
            if nbrs and not (stay and rng.random() < stay):
                room = nbrs[rng.randrange(len(nbrs))]
            cost = spm
        steps += cost
        if _goal_satisfied(house, room, goal):
            return EpisodeResult(True, steps, goal, opt, geo)
    return EpisodeResult(False, steps, goal, opt, geo)


def _run_planned_episode(
    model: SemanticModel,
    house: HouseContext,
    start: int,
    goal: int,
    config: AgentConfig,
    rng: random.Random,
    belief: BeliefState,
    update: bool,
) -> EpisodeResult:
    vocab = model.vocab
    if house.n_signals != vocab.n_signals:
        raise ValueError(
            f"house emits {house.n_signals} signals but model vocabulary has {vocab.n_signals}"
        )
    spm = config.profile.steps_per_move
    max_moves = config.horizon // spm
    # window never updates more often than every replan_interval steps
    moves_per_window = max(1, -(-config.replan_interval // spm))
    opt, geo = _distances(house, start, goal, spm)
    observer = _Observer(house, config.noise, rng)
    none_mask = 1 << vocab.none_index
    node_mask_all = (1 << vocab.n_nodes) - 1

    room = start
    steps = 0
    moves = 0
    if _goal_satisfied(house, room, goal):
        return EpisodeResult(True, 0, goal, opt, geo)
    s_mask = observer.observe(room, spm)  # free perception of the spawn room
    trace: list[WindowRecord] = []
    success = False

    while moves < max_moves and not success:
        plan_mask = s_mask if (s_mask & node_mask_all) else none_mask
        sources = [i for i in range(vocab.n_nodes) if (plan_mask >> i) & 1]
        plan = _best_plan_from_sources(belief, sources, goal)
        sub_target = plan.sub_target
        window_start = steps
        window_s = s_mask
        window_or = s_mask
        for _ in range(moves_per_window):
            if moves >= max_moves:
                break
            room, cost = step_subpolicy(house, room, sub_target, config.profile, rng)
            steps += cost
            moves += 1
            s_mask = observer.observe(room, spm)
            window_or |= s_mask
            if _goal_satisfied(house, room, goal):
                success = True
                break
            if (s_mask >> sub_target) & 1:
                break  # sub-target reached: replan early
        samples = (
            samples_from_or(window_or, vocab.n_nodes, vocab.n_objects, config.negatives)
            if update
            else []
        )
        if update and samples:
            update_beliefs(belief, samples)
        trace.append(
            WindowRecord(
                step=window_start,
                s_s=mask_to_vector(window_s, vocab.n_signals),
                B=mask_to_vector(window_or, vocab.n_signals),
                plan=plan,
                sub_target=sub_target,
                samples=tuple(samples),
                belief_digest=belief.digest(),
            )
        )
    return EpisodeResult(success, steps, goal, opt, geo, trace)
