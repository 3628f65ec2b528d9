"""Observation extraction from signal windows and max-belief path planning.

A window of semantic signal vectors is collapsed with a bit-OR; co-active
signal pairs become positive reachability samples. Planning finds the simple
path from a currently active signal to the goal that maximizes the product of
edge beliefs, via Dijkstra on -log(belief) weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappush, heappop
from typing import Sequence

import numpy as np

from .model import BeliefState
from .vocab import SignalVocabulary

NEGATIVE_MODES = ("xor", "all")


@dataclass(frozen=True)
class ObservationBatch:
    """Bit-OR aggregate of a window plus the (edge, y) samples it implies."""

    B: tuple[int, ...]
    samples: tuple[tuple[tuple[int, int], int], ...]


@dataclass(frozen=True)
class Plan:
    """A signal path tau[0..m] ending at the goal, scored by the product of
    edge beliefs along it. sub_target is the next signal to pursue."""

    tau: tuple[int, ...]
    score: float

    @property
    def sub_target(self) -> int:
        return self.tau[1] if len(self.tau) > 1 else self.tau[0]


def signal_mask(vector: Sequence[int]) -> int:
    mask = 0
    for idx, bit in enumerate(vector):
        if bit not in (0, 1):
            raise ValueError(f"signal vectors are binary, got {bit!r} at index {idx}")
        mask |= bit << idx
    return mask


def mask_to_vector(mask: int, n_signals: int) -> tuple[int, ...]:
    return tuple((mask >> i) & 1 for i in range(n_signals))


def samples_from_or(
    b_mask: int, n_nodes: int, n_objects: int, negatives: str = "xor"
) -> list[tuple[tuple[int, int], int]]:
    """(edge, y) samples implied by a window's bit-OR aggregate.

    Co-active room-graph pairs give y=1. With negatives="xor" a pair with
    exactly one active endpoint gives y=0 and a fully unseen pair gives
    nothing; with "all" unseen pairs give y=0 too. (room, object) pairs
    follow the same rule but only for rooms that were actually seen.
    """
    if negatives not in NEGATIVE_MODES:
        raise ValueError(f"negatives must be one of {NEGATIVE_MODES}, got {negatives!r}")
    samples = []
    for i in range(n_nodes):
        bi = (b_mask >> i) & 1
        for j in range(i + 1, n_nodes):
            bj = (b_mask >> j) & 1
            if bi and bj:
                samples.append(((i, j), 1))
            elif bi != bj:
                samples.append(((i, j), 0))
            elif negatives == "all":
                samples.append(((i, j), 0))
    for o in range(n_objects):
        bo = (b_mask >> (n_nodes + o)) & 1
        for i in range(n_nodes):
            if (b_mask >> i) & 1:
                samples.append(((i, n_nodes + o), bo))
    return samples


def extract_observations(
    trace: Sequence[Sequence[int]], vocab: SignalVocabulary, negatives: str = "xor"
) -> ObservationBatch:
    """Collapse a window of signal vectors into an observation batch."""
    if not trace:
        raise ValueError("trace must contain at least one signal vector")
    b_mask = 0
    for vec in trace:
        if len(vec) != vocab.n_signals:
            raise ValueError(
                f"signal vector length {len(vec)} != vocabulary size {vocab.n_signals}"
            )
        b_mask |= signal_mask(vec)
    samples = samples_from_or(b_mask, vocab.n_nodes, vocab.n_objects, negatives)
    return ObservationBatch(B=mask_to_vector(b_mask, vocab.n_signals), samples=tuple(samples))


def _dijkstra_keys(
    weights: np.ndarray, sources: Sequence[int], goal: int | None
) -> dict[int, tuple[float, int, tuple[int, ...]]]:
    """Settled (cost, n_edges, path) keys per node, smallest first under the
    (cost, fewer edges, lexicographic path) order. Weights must be positive,
    which makes every settled path simple. Stops early once `goal` settles."""
    n = weights.shape[0]
    heap = [(0.0, 0, (s,)) for s in sorted(sources)]
    settled: dict[int, tuple[float, int, tuple[int, ...]]] = {}
    while heap:
        cost, n_edges, path = heappop(heap)
        v = path[-1]
        if v in settled:
            continue
        settled[v] = (cost, n_edges, path)
        if v == goal or len(settled) == n:
            break
        row = weights[v]
        for u in range(n):
            if u not in settled and u != v:
                heappush(heap, (cost + row[u], n_edges + 1, path + (u,)))
    return settled


def path_score(belief: BeliefState, tau: Sequence[int]) -> float:
    """Product of edge beliefs along a signal path (1.0 for a single node)."""
    score = 1.0
    for a, b in zip(tau, tau[1:]):
        score *= belief.edge_belief((a, b))
    return score


def best_plan(belief: BeliefState, s_s: Sequence[int], goal: int) -> Plan:
    """Max-belief simple path from the active signals in `s_s` to `goal`.

    Room-graph bits of s_s (the none-bit counts) are the allowed starting
    signals. Ties break toward fewer edges, then the lexicographically
    smallest index sequence. An object goal is a room path plus one final
    containment hop. If the goal bit is already active the plan is the goal
    alone with score 1.
    """
    vocab = belief.model.vocab
    n = vocab.n_nodes
    if not 0 <= goal < vocab.n_signals:
        raise ValueError(f"goal index {goal} out of range")
    mask = signal_mask(s_s)
    if (mask >> goal) & 1:
        return Plan(tau=(goal,), score=1.0)
    sources = [i for i in range(n) if (mask >> i) & 1]
    if not sources:
        raise ValueError("no active room-graph signal to plan from")
    return _best_plan_from_sources(belief, sources, goal)


def _best_plan_from_sources(belief: BeliefState, sources: Sequence[int], goal: int) -> Plan:
    n = belief.model.vocab.n_nodes
    weights = -np.log(belief.belief)
    if goal < n:
        if goal in sources:
            return Plan(tau=(goal,), score=1.0)
        settled = _dijkstra_keys(weights, sources, goal)
        tau = settled[goal][2]
        return Plan(tau=tau, score=path_score(belief, tau))
    if belief.obj_belief is None:
        raise ValueError("object goal but the model has no containment priors")
    obj = goal - n
    settled = _dijkstra_keys(weights, sources, None)
    obj_w = -np.log(belief.obj_belief[:, obj])
    best = None
    for room, (cost, n_edges, path) in settled.items():
        key = (cost + obj_w[room], n_edges + 1, path + (goal,))
        if best is None or key < best:
            best = key
    tau = best[2]
    return Plan(tau=tau, score=path_score(belief, tau))


def replan_schedule(step: int, interval: int, sub_target_reached: bool = False) -> bool:
    """True when a replan is due: at every `interval`-step boundary, or as
    soon as the current sub-target has been reached."""
    if interval < 1:
        raise ValueError("replan interval must be >= 1")
    return sub_target_reached or step % interval == 0
