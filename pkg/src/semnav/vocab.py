"""Signal vocabulary shared by the model, planner, and simulated worlds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

DEFAULT_ROOM_SIGNALS = (
    "kitchen",
    "living_room",
    "dining_room",
    "bedroom",
    "bathroom",
    "office",
    "garage",
    "outdoor",
)


@dataclass(frozen=True)
class SignalVocabulary:
    """Ordered layout of the binary signals an agent can perceive.

    Indices 0..K-1 are room types, index K is the none-signal (the agent is
    in no labeled room), and indices K+1..K+K_o are object types. The room
    graph used for beliefs and planning spans the first K+1 signals; object
    signals attach to it only through containment edges.
    """

    room_signals: tuple[str, ...]
    none_signal: str = "none"
    object_signals: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "room_signals", tuple(self.room_signals))
        object.__setattr__(self, "object_signals", tuple(self.object_signals))
        if len(self.room_signals) < 2:
            raise ValueError("need at least 2 room signals")
        names = list(self.room_signals) + [self.none_signal] + list(self.object_signals)
        if len(set(names)) != len(names):
            raise ValueError("signal names must be unique")

    @property
    def n_rooms(self) -> int:
        return len(self.room_signals)

    @property
    def n_nodes(self) -> int:
        """Room-graph node count: the K room signals plus the none-signal."""
        return len(self.room_signals) + 1

    @property
    def n_objects(self) -> int:
        return len(self.object_signals)

    @property
    def n_signals(self) -> int:
        return self.n_nodes + self.n_objects

    @property
    def none_index(self) -> int:
        return len(self.room_signals)

    def object_index(self, obj: int) -> int:
        """Signal index of object type `obj` (0-based)."""
        if not 0 <= obj < self.n_objects:
            raise ValueError(f"object type {obj} out of range")
        return self.n_nodes + obj

    def name(self, index: int) -> str:
        if 0 <= index < self.n_rooms:
            return self.room_signals[index]
        if index == self.none_index:
            return self.none_signal
        if self.n_nodes <= index < self.n_signals:
            return self.object_signals[index - self.n_nodes]
        raise ValueError(f"signal index {index} out of range")

    def node_names(self) -> tuple[str, ...]:
        return self.room_signals + (self.none_signal,)


def default_vocabulary(object_signals: Sequence[str] = ()) -> SignalVocabulary:
    return SignalVocabulary(DEFAULT_ROOM_SIGNALS, object_signals=tuple(object_signals))
