"""Procedurally generated house worlds and their simulation dynamics.

Space is discretized at room granularity: a house is a connected undirected
graph of typed rooms with optional object placements. One macro-move costs
`steps_per_move` primitive steps, so the usual primitive-step horizons and
replan intervals translate directly.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Deque, Iterable, Sequence

import numpy as np

NONE_TYPE = -1  # room type of unlabeled rooms; they emit the none-signal

CORPUS_FORMAT_VERSION = 1


@dataclass
class HouseContext:
    """Ground-truth semantic environment: typed rooms, adjacency, objects.

    `room_types[id]` is a type index in 0..K-1 or NONE_TYPE. Derived lookup
    tables (neighbor lists, per-room signal masks) are built once; houses are
    immutable after construction.
    """

    room_types: tuple[int, ...]
    adjacency: tuple[tuple[int, int], ...]
    n_room_types: int
    objects: tuple[tuple[int, int], ...] = ()  # (object_type, room_id)
    n_object_types: int = 0
    spawn: tuple[int, ...] = ()
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    signal_masks: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.room_types = tuple(int(t) for t in self.room_types)
        n = len(self.room_types)
        if n == 0:
            raise ValueError("house must contain at least one room")
        for t in self.room_types:
            if t != NONE_TYPE and not 0 <= t < self.n_room_types:
                raise ValueError(f"room type {t} out of range")
        edges = set()
        for a, b in self.adjacency:
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"invalid edge ({a}, {b})")
            edges.add((min(a, b), max(a, b)))
        self.adjacency = tuple(sorted(edges))
        for t, r in self.objects:
            if not 0 <= t < self.n_object_types:
                raise ValueError(f"object type {t} out of range")
            if not 0 <= r < n:
                raise ValueError(f"object placed in unknown room {r}")
        self.objects = tuple((int(t), int(r)) for t, r in self.objects)
        self.spawn = tuple(self.spawn) if self.spawn else tuple(range(n))
        if any(not 0 <= r < n for r in self.spawn):
            raise ValueError("spawn candidate out of range")

        nbrs: list[list[int]] = [[] for _ in range(n)]
        for a, b in self.adjacency:
            nbrs[a].append(b)
            nbrs[b].append(a)
        self.neighbors = tuple(tuple(sorted(x)) for x in nbrs)
        if not self._connected():
            raise ValueError("house graph must be connected")

        none_bit = self.n_room_types
        masks = [
            1 << (t if t != NONE_TYPE else none_bit) for t in self.room_types
        ]
        obj_base = self.n_room_types + 1
        for t, r in self.objects:
            masks[r] |= 1 << (obj_base + t)
        self.signal_masks = tuple(masks)

    def _connected(self) -> bool:
        n = len(self.room_types)
        seen = {0}
        stack = [0]
        while stack:
            for u in self.neighbors[stack.pop()]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == n

    @property
    def n_rooms(self) -> int:
        return len(self.room_types)

    @property
    def n_signals(self) -> int:
        return self.n_room_types + 1 + self.n_object_types

    def rooms_with_signal(self, signal: int) -> tuple[int, ...]:
        return tuple(
            r for r in range(self.n_rooms) if (self.signal_masks[r] >> signal) & 1
        )


@dataclass
class GeneratorConfig:
    """Semantic distribution a house corpus is drawn from.

    co_occurrence[i, j] is the adjacency propensity of a type-i and a type-j
    room: it weights spanning-tree attachment and, scaled by
    `extra_edge_scale`, sets the probability of each non-tree edge. Pairs
    touching an unlabeled room use `untyped_adjacency` instead.
    object_propensity[t, o] is the chance a type-t room contains an object of
    type o; `type_weights` skews how often each room type occurs.
    """

    n_room_types: int
    room_count: tuple[int, int]
    co_occurrence: np.ndarray
    object_propensity: np.ndarray | None = None
    untyped_rate: float = 0.15
    untyped_adjacency: float = 0.05
    extra_edge_scale: float = 1.0
    type_weights: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.room_count
        if not 1 <= lo <= hi:
            raise ValueError(f"room_count range ({lo}, {hi}) must satisfy 1 <= lo <= hi")
        if self.n_room_types < 1:
            raise ValueError("need at least one room type")
        m = np.asarray(self.co_occurrence, dtype=float)
        k = self.n_room_types
        if m.shape != (k, k):
            raise ValueError(f"co_occurrence must be {k}x{k}, got {m.shape}")
        if (m < 0).any() or (m > 1).any() or not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("co_occurrence must be a symmetric matrix of probabilities")
        self.co_occurrence = m
        if self.object_propensity is not None:
            p = np.asarray(self.object_propensity, dtype=float)
            if p.ndim != 2 or p.shape[0] != k:
                raise ValueError(f"object_propensity must have {k} rows, got {p.shape}")
            if (p < 0).any() or (p > 1).any():
                raise ValueError("object_propensity entries must be probabilities")
            self.object_propensity = p
        if not 0 <= self.untyped_rate < 1:
            raise ValueError("untyped_rate must be in [0, 1)")
        if not 0 <= self.untyped_adjacency <= 1:
            raise ValueError("untyped_adjacency must be in [0, 1]")
        if not 0 <= self.extra_edge_scale <= 1:
            raise ValueError("extra_edge_scale must be in [0, 1]")
        if self.type_weights is not None:
            tw = tuple(float(w) for w in self.type_weights)
            if len(tw) != k or any(w < 0 for w in tw) or sum(tw) <= 0:
                raise ValueError(f"type_weights must be {k} non-negative weights, not all zero")
            self.type_weights = tw

    @property
    def n_object_types(self) -> int:
        return 0 if self.object_propensity is None else self.object_propensity.shape[1]


@dataclass
class SubPolicyProfile:
    """Stochastic navigator standing in for a learned goal-conditioned policy.

    The navigator is nearsighted but competent: with probability p_adj a
    macro-move steps straight into an adjacent room satisfying the target;
    within drift_range rooms of the nearest satisfying room it takes a
    correct-direction step with probability drift_bias. Everywhere else it
    keeps searching: the move stays in place with probability lateral_stay,
    else goes to a uniform random neighbor. Every macro-move costs
    steps_per_move primitive steps.

    undirected_stay is not the navigator's own rate: it is how often a
    *policy-free* walker (the random baseline) fails to leave the room in
    one macro-move, and is kept here so all motion rates live in one place.
    """

    p_adj: float = 0.75
    steps_per_move: int = 25
    lateral_stay: float = 0.4
    drift_bias: float = 0.3
    drift_range: int = 2
    undirected_stay: float = 0.85

    def __post_init__(self):
        if not 0 <= self.p_adj <= 1:
            raise ValueError("p_adj must be in [0, 1]")
        if self.steps_per_move < 1:
            raise ValueError("steps_per_move must be >= 1")
        if not 0 <= self.lateral_stay < 1:
            raise ValueError("lateral_stay must be in [0, 1)")
        if not 0 <= self.drift_bias <= 1:
            raise ValueError("drift_bias must be in [0, 1]")
        if self.drift_range < 1:
            raise ValueError("drift_range must be >= 1")
        if not 0 <= self.undirected_stay < 1:
            raise ValueError("undirected_stay must be in [0, 1)")


@dataclass
class ExtractorNoise:
    """Per-signal false-positive/false-negative channel with a confirmation
    filter: a bit is emitted only after `window` consecutive raw 1s."""

    false_positive: float | Sequence[float] = 0.0
    false_negative: float | Sequence[float] = 0.0
    window: int = 3

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("confirmation window must be >= 1")
        for name in ("false_positive", "false_negative"):
            v = getattr(self, name)
            rates = [v] if isinstance(v, (int, float)) else list(v)
            if any(not 0 <= r < 1 for r in rates):
                raise ValueError(f"{name} rates must be in [0, 1)")

    def rates(self, n_signals: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
        def expand(v):
            if isinstance(v, (int, float)):
                return (float(v),) * n_signals
            t = tuple(float(x) for x in v)
            if len(t) != n_signals:
                raise ValueError(f"need {n_signals} per-signal rates, got {len(t)}")
            return t

        return expand(self.false_positive), expand(self.false_negative)


def _pair_propensity(config: GeneratorConfig, ta: int, tb: int) -> float:
    if ta == NONE_TYPE or tb == NONE_TYPE:
        return config.untyped_adjacency
    return float(config.co_occurrence[ta, tb])


def generate_house(config: GeneratorConfig, rng_seed: int) -> HouseContext:
    """Sample a house: typed rooms on a random spanning tree whose attachment
    is weighted by type co-occurrence, extra edges by the same propensities,
    objects by placement propensity."""
    rng = random.Random(rng_seed)
    k = config.n_room_types
    n = rng.randint(config.room_count[0], config.room_count[1])
    weights = config.type_weights or (1.0,) * k
    types = [
        NONE_TYPE if rng.random() < config.untyped_rate
        else rng.choices(range(k), weights=weights)[0]
        for _ in range(n)
    ]
    edges = set()
    for r in range(1, n):
        attach = [_pair_propensity(config, types[r], types[p]) for p in range(r)]
        total = sum(attach)
        if total <= 0:
            parent = rng.randrange(r)
        else:
            u = rng.random() * total
            acc = 0.0
            parent = r - 1
            for p, w in enumerate(attach):
                acc += w
                if u < acc:
                    parent = p
                    break
        edges.add((parent, r))
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) in edges:
                continue
            p = config.extra_edge_scale * _pair_propensity(config, types[a], types[b])
            if rng.random() < p:
                edges.add((a, b))
    objects = []
    if config.object_propensity is not None:
        prop = config.object_propensity
        for r in range(n):
            if types[r] == NONE_TYPE:
                continue
            for o in range(config.n_object_types):
                if rng.random() < prop[types[r], o]:
                    objects.append((o, r))
    return HouseContext(
        room_types=tuple(types),
        adjacency=tuple(sorted(edges)),
        n_room_types=k,
        objects=tuple(objects),
        n_object_types=config.n_object_types,
    )


def true_signal(house: HouseContext, room: int) -> tuple[int, ...]:
    """Oracle semantic signal vector at a room: its type bit (or the
    none-bit) plus one bit per object type present in the room."""
    if not 0 <= room < house.n_rooms:
        raise ValueError(f"unknown room {room}")
    mask = house.signal_masks[room]
    return tuple((mask >> i) & 1 for i in range(house.n_signals))


def noisy_signal(
    true_vector: Sequence[int],
    noise: ExtractorNoise,
    history: Deque[int],
    rng: random.Random,
) -> tuple[int, ...]:
    """One extractor tick: flip bits per the FP/FN rates, append the raw
    reading to `history`, and emit only bits raw-high for the last `window`
    consecutive ticks."""
    n = len(true_vector)
    fp, fn = noise.rates(n)
    mask = 0
    for i, bit in enumerate(true_vector):
        if bit not in (0, 1):
            raise ValueError(f"signal vectors are binary, got {bit!r}")
        mask |= bit << i
    raw = _noisy_tick(mask, n, fp, fn, noise.window, history, rng)
    return tuple((raw >> i) & 1 for i in range(n))


def _noisy_tick(
    true_mask: int,
    n_signals: int,
    fp: Sequence[float],
    fn: Sequence[float],
    window: int,
    history: Deque[int],
    rng: random.Random,
) -> int:
    raw = 0
    for i in range(n_signals):
        u = rng.random()
        if (true_mask >> i) & 1:
            raw |= (u >= fn[i]) << i
        else:
            raw |= (u < fp[i]) << i
    history.append(raw)
    while len(history) > window:
        history.popleft()
    if len(history) < window:
        return 0
    emitted = raw
    for m in history:
        emitted &= m
    return emitted


def _satisfies(house: HouseContext, room: int, target: int) -> bool:
    return bool((house.signal_masks[room] >> target) & 1)


def _distance_field(house: HouseContext, target: int, radius: int) -> dict[int, int]:
    """BFS distance to the nearest room satisfying `target`, truncated at
    `radius`. Cached per house; the cache is derived state, never serialized."""
    cache = house.__dict__.setdefault("_distance_fields", {})
    key = (target, radius)
    field = cache.get(key)
    if field is not None:
        return field
    field = {}
    frontier = [r for r in range(house.n_rooms) if (house.signal_masks[r] >> target) & 1]
    for r in frontier:
        field[r] = 0
    d = 0
    while frontier and d < radius:
        d += 1
        nxt = []
        for r in frontier:
            for u in house.neighbors[r]:
                if u not in field:
                    field[u] = d
                    nxt.append(u)
        frontier = nxt
    cache[key] = field
    return field


def step_subpolicy(
    house: HouseContext,
    room: int,
    target: int,
    profile: SubPolicyProfile,
    rng: random.Random,
) -> tuple[int, int]:
    """One macro-move toward a target signal. Returns (next room, primitive
    steps consumed). In a room with no neighbors the agent stays put."""
    cost = profile.steps_per_move
    nbrs = house.neighbors[room]
    if not nbrs:
        return room, cost
    matching = [r for r in nbrs if _satisfies(house, r, target)]
    if matching:
        # targeted maneuver: succeed with p_adj, otherwise the move is a
        # fumble and ends in a non-matching neighbor (or in place)
        if rng.random() < profile.p_adj:
            nxt = matching[rng.randrange(len(matching))] if len(matching) > 1 else matching[0]
            return nxt, cost
        others = [r for r in nbrs if r not in matching]
        if not others or (profile.lateral_stay and rng.random() < profile.lateral_stay):
            return room, cost
        return others[rng.randrange(len(others))], cost
    if profile.drift_bias:
        field = _distance_field(house, target, profile.drift_range)
        here = field.get(room)
        if here is not None and rng.random() < profile.drift_bias:
            closer = [u for u in nbrs if field.get(u, here) < here]
            if closer:
                nxt = closer[rng.randrange(len(closer))] if len(closer) > 1 else closer[0]
                return nxt, cost
    if profile.lateral_stay and rng.random() < profile.lateral_stay:
        return room, cost
    return nbrs[rng.randrange(len(nbrs))], cost


def random_walk(
    house: HouseContext, start: int, steps: int, rng: random.Random, stay: float = 0.0
) -> list[int]:
    """Uniform-neighbor walk of exactly `steps` macro-moves (start included
    in the returned sequence). A nonzero `stay` makes each move keep the
    current room with that probability, modeling an undirected policy whose
    primitive actions often fail to exit the room."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not 0 <= stay < 1:
        raise ValueError("stay must be in [0, 1)")
    path = [start]
    room = start
    for _ in range(steps):
        nbrs = house.neighbors[room]
        if nbrs and not (stay and rng.random() < stay):
            room = nbrs[rng.randrange(len(nbrs))]
        path.append(room)
    return path


def optimal_plan_steps(house: HouseContext, start: int, goal: int) -> int | None:
    """Shortest room-graph distance from `start` to the nearest room whose
    signal satisfies `goal`; None when no room in the house does."""
    if (house.signal_masks[start] >> goal) & 1:
        return 0
    dist = {start: 0}
    frontier = deque([start])
    while frontier:
        room = frontier.popleft()
        for u in house.neighbors[room]:
            if u not in dist:
                dist[u] = dist[room] + 1
                if (house.signal_masks[u] >> goal) & 1:
                    return dist[u]
                frontier.append(u)
    return None


# --- corpus files -----------------------------------------------------------

def house_to_dict(house: HouseContext) -> dict:
    return {
        "kind": "house",
        "rooms": [[r, t] for r, t in enumerate(house.room_types)],
        "adjacency": [list(e) for e in house.adjacency],
        "objects": [list(o) for o in house.objects],
        "n_room_types": house.n_room_types,
        "n_object_types": house.n_object_types,
        "spawn": list(house.spawn),
    }


def house_from_dict(doc: dict) -> HouseContext:
    rooms = sorted(doc["rooms"])
    if [r for r, _ in rooms] != list(range(len(rooms))):
        raise ValueError("house rooms must be ids 0..n-1")
    return HouseContext(
        room_types=tuple(t for _, t in rooms),
        adjacency=tuple(tuple(e) for e in doc["adjacency"]),
        n_room_types=int(doc["n_room_types"]),
        objects=tuple(tuple(o) for o in doc.get("objects", ())),
        n_object_types=int(doc.get("n_object_types", 0)),
        spawn=tuple(doc.get("spawn", ())),
    )


def write_corpus(
    path: str | Path, houses: Iterable[HouseContext], header: dict | None = None
) -> None:
    """JSON-lines corpus: one header record, then one record per house."""
    houses = list(houses)
    head = {"kind": "header", "version": CORPUS_FORMAT_VERSION, "count": len(houses)}
    head.update(header or {})
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for house in houses:
            fh.write(json.dumps(house_to_dict(house), sort_keys=True) + "\n")


def read_corpus(path: str | Path) -> tuple[list[HouseContext], dict]:
    houses = []
    header: dict = {}
    with open(path) as fh:
        for line in fh:
            doc = json.loads(line)
            if doc.get("kind") == "header":
                header = doc
            elif doc.get("kind") == "house":
                houses.append(house_from_dict(doc))
            else:
                raise ValueError(f"unknown corpus record kind {doc.get('kind')!r}")
    return houses, header
