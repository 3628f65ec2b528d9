"""Learning model parameters from training houses.

Edge priors come from random-exploration reachability samples (maximum
likelihood with smoothing); the observation-channel rates have no direct
supervision and are picked by grid search against agent success on
validation houses.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Sequence

import numpy as np

from .agents import AgentConfig
from .model import SemanticModel
from .vocab import SignalVocabulary
from .world import HouseContext

logger = logging.getLogger(__name__)


def _padded_neighbors(house: HouseContext) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor lists as a padded matrix for vectorized walks. Rooms with no
    neighbors self-loop so degree is always >= 1."""
    n = house.n_rooms
    deg = np.array([max(1, len(house.neighbors[r])) for r in range(n)], dtype=np.int64)
    pad = np.zeros((n, deg.max()), dtype=np.int64)
    for r in range(n):
        nbrs = house.neighbors[r] or (r,)
        pad[r, : len(nbrs)] = nbrs
    return pad, deg


def _hit_frequencies(
    rng: np.random.Generator,
    starts: Sequence[int],
    n_samples: int,
    n_moves: int,
    pad: np.ndarray,
    deg: np.ndarray,
    hit: np.ndarray,
    stay: float,
) -> list[int]:
    """n_samples random walks of n_moves moves from uniformly drawn start
    rooms; each sample is 1 iff a visited room (start included) hits. Each
    move keeps the current room with probability `stay`, else steps to a
    uniform neighbor."""
    starts = np.asarray(starts, dtype=np.int64)
    state = starts[rng.integers(0, len(starts), size=n_samples)]
    found = hit[state].copy()
    alive = np.flatnonzero(~found)
    cur = state[alive]
    for _ in range(n_moves):
        if alive.size == 0:
            break
        nxt = pad[cur, rng.integers(0, deg[cur])]
        if stay:
            moving = rng.random(cur.size) >= stay
            cur = np.where(moving, nxt, cur)
        else:
            cur = nxt
        newly = hit[cur]
        if newly.any():
            found[alive[newly]] = True
            keep = ~newly
            alive = alive[keep]
            cur = cur[keep]
    return found.astype(int).tolist()


def collect_prior_samples(
    train_houses: Sequence[HouseContext],
    vocab: SignalVocabulary,
    explore_steps: int = 300,
    samples_per_edge: int = 50,
    rng_seed: int = 0,
    steps_per_move: int = 25,
    lateral_stay: float = 0.4,
) -> dict[tuple[int, int], list[int]]:
    """Binary reachability samples for every unordered room-graph pair and
    every (room node, object) pair, keyed by signal-index pairs.

    For each pair and each repetition, a random walk starts at a random room
    carrying one signal of the pair; the sample is 1 iff a room carrying the
    other signal is visited within the exploration budget. `explore_steps` is
    a primitive-step count (explore_steps // steps_per_move macro-moves), and
    the walk uses the same undirected-policy dynamics as the agents' lateral
    moves (each move stays put with probability `lateral_stay`). Room pairs
    alternate walk direction across repetitions; repetitions whose start
    signal is absent from a house are skipped.
    """
    if explore_steps < 0:
        raise ValueError("explore_steps must be >= 0")
    if samples_per_edge < 1:
        raise ValueError("samples_per_edge must be >= 1")
    if not 0 <= lateral_stay < 1:
        raise ValueError("lateral_stay must be in [0, 1)")
    n_moves = explore_steps // steps_per_move
    rng = np.random.default_rng(rng_seed)
    n = vocab.n_nodes
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pairs += [(i, n + o) for i in range(n) for o in range(vocab.n_objects)]
    samples: dict[tuple[int, int], list[int]] = {p: [] for p in pairs}

    for house in train_houses:
        if house.n_signals != vocab.n_signals:
            raise ValueError("house signal layout does not match the vocabulary")
        pad, deg = _padded_neighbors(house)
        room_sets = {
            s: np.array(house.rooms_with_signal(s), dtype=np.int64)
            for s in range(house.n_signals)
        }
        hit_masks = {
            s: np.array(
                [bool((house.signal_masks[r] >> s) & 1) for r in range(house.n_rooms)]
            )
            for s in range(house.n_signals)
        }
        for i, j in pairs:
            if j < n:  # room pair: alternate direction across repetitions
                n_fwd = (samples_per_edge + 1) // 2
                legs = [(i, j, n_fwd), (j, i, samples_per_edge - n_fwd)]
            else:
                legs = [(i, j, samples_per_edge)]
            for src, dst, count in legs:
                if count == 0:
                    continue
                starts = room_sets[src]
                if starts.size == 0:
                    logger.debug(
                        "house lacks signal %d: skipping %d samples for pair (%d, %d)",
                        src, count, i, j,
                    )
                    continue
                samples[(i, j)].extend(
                    _hit_frequencies(
                        rng, starts, count, n_moves, pad, deg, hit_masks[dst], lateral_stay
                    )
                )
    return samples


def tune_psi_obs(
    model: SemanticModel,
    candidate_grid: Sequence[tuple[float, float]],
    valid_houses: Sequence[HouseContext],
    agent_config: AgentConfig,
    episodes: Sequence,
    jobs: int = 1,
) -> tuple[float, float]:
    """Grid search for the observation-channel rates: run the planning agent
    on the validation episodes under each candidate and keep the one with the
    highest mean success. Ties break toward the smaller rate sum, then the
    smaller pair."""
    candidates = [(float(a), float(b)) for a, b in candidate_grid]
    if not candidates:
        raise ValueError("candidate grid must not be empty")
    if len(candidates) == 1:
        return candidates[0]
    from .evaluate import run_agent_on_specs  # local import: avoids a cycle

    best = None
    for psi0, psi1 in candidates:
        candidate_model = replace(model, psi_obs_0=psi0, psi_obs_1=psi1)
        results = run_agent_on_specs(
            agent_config, candidate_model, valid_houses, episodes, jobs=jobs
        )
        mean_success = sum(r.success for r in results) / len(results)
        key = (-mean_success, psi0 + psi1, (psi0, psi1))
        if best is None or key < best:
            best = key
    return best[2]


def validation_episodes(
    valid_houses: Sequence[HouseContext],
    vocab: SignalVocabulary,
    n_episodes: int = 300,
    rng_seed: int = 0,
):
    """Uniform episode specs over the validation houses (no stratification)."""
    from .evaluate import EvalProtocol, build_protocol

    protocol = EvalProtocol(
        base_episodes=n_episodes, stratum_floor=0, seed=rng_seed
    )
    return build_protocol(valid_houses, protocol, vocab)
