"""Latent reachability model over semantic signals.

Each unordered pair of room-graph signals carries a Bernoulli latent "these
two are directly reachable from one another"; a shared noisy channel emits
binary observations of it. Beliefs are per-edge posteriors with closed form
because the prior and the likelihood both factor over edges.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .vocab import SignalVocabulary

EPS = 1e-9

MODEL_FORMAT_VERSION = 1


def clamp_prob(p: float) -> float:
    """Clamp a probability into [EPS, 1-EPS] so log-space weights stay finite."""
    return min(max(float(p), EPS), 1.0 - EPS)


def _check_prob(name: str, p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or not 0.0 < p < 1.0:
        raise ValueError(f"{name} must be a probability in (0, 1), got {p!r}")
    return p


def canonical_edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise ValueError(f"self-edge ({i}, {i}) is undefined")
    return (i, j) if i < j else (j, i)


def posterior_edge(
    prior: float, n_pos: int, n_neg: int, psi_obs_0: float, psi_obs_1: float
) -> float:
    """Posterior P(z=1 | n_pos positive and n_neg negative observations).

    psi_obs_0 is the false-positive rate of the channel (P(y=1 | z=0)) and
    psi_obs_1 the miss rate (P(y=0 | z=1)). Computed in log space and clamped
    to [EPS, 1-EPS].
    """
    prior = _check_prob("prior", prior)
    psi_obs_0 = clamp_prob(_check_finite("psi_obs_0", psi_obs_0))
    psi_obs_1 = clamp_prob(_check_finite("psi_obs_1", psi_obs_1))
    if n_pos < 0 or n_neg < 0:
        raise ValueError("observation counts must be non-negative")
    log_on = math.log(prior) + n_pos * math.log(1.0 - psi_obs_1) + n_neg * math.log(psi_obs_1)
    log_off = math.log(1.0 - prior) + n_pos * math.log(psi_obs_0) + n_neg * math.log(1.0 - psi_obs_0)
    m = max(log_on, log_off)
    on = math.exp(log_on - m)
    post = on / (on + math.exp(log_off - m))
    return clamp_prob(post)


def _check_finite(name: str, p: float) -> float:
    p = float(p)
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must be a probability in [0, 1], got {p!r}")
    return p


@dataclass
class ObservationTally:
    """Per-edge counts of positive/negative observation samples.

    Room-graph pairs are stored once per unordered pair (upper triangle);
    (room node, object) pairs sit in separate node-by-object arrays. Edges
    are addressed by signal-index pairs, so an object edge is
    (node, n_nodes + object_type).
    """

    n_nodes: int
    n_objects: int = 0
    edge_pos: np.ndarray = field(init=False)
    edge_neg: np.ndarray = field(init=False)
    obj_pos: np.ndarray = field(init=False)
    obj_neg: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edge_pos = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        self.edge_neg = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        self.obj_pos = np.zeros((self.n_nodes, self.n_objects), dtype=np.int64)
        self.obj_neg = np.zeros((self.n_nodes, self.n_objects), dtype=np.int64)

    def _locate(self, edge: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, int, int]:
        i, j = canonical_edge(*edge)
        if i < 0:
            raise ValueError(f"invalid signal index in edge {edge}")
        if j < self.n_nodes:
            return self.edge_pos, self.edge_neg, i, j
        obj = j - self.n_nodes
        if i >= self.n_nodes or obj >= self.n_objects:
            raise ValueError(f"edge {edge} references unknown signal indices")
        return self.obj_pos, self.obj_neg, i, obj

    def add(self, edge: tuple[int, int], y: int) -> None:
        pos, neg, i, j = self._locate(edge)
        if y == 1:
            pos[i, j] += 1
        elif y == 0:
            neg[i, j] += 1
        else:
            raise ValueError(f"observation value must be 0 or 1, got {y!r}")

    def counts(self, edge: tuple[int, int]) -> tuple[int, int]:
        pos, neg, i, j = self._locate(edge)
        return int(pos[i, j]), int(neg[i, j])

    def copy(self) -> "ObservationTally":
        out = ObservationTally(self.n_nodes, self.n_objects)
        out.edge_pos = self.edge_pos.copy()
        out.edge_neg = self.edge_neg.copy()
        out.obj_pos = self.obj_pos.copy()
        out.obj_neg = self.obj_neg.copy()
        return out


def _validate_prior_matrix(psi_prior: np.ndarray, n_nodes: int) -> np.ndarray:
    m = np.asarray(psi_prior, dtype=float)
    if m.shape != (n_nodes, n_nodes):
        raise ValueError(f"psi_prior must be {n_nodes}x{n_nodes}, got {m.shape}")
    if not np.isfinite(m).all() or (m < 0).any() or (m > 1).any():
        raise ValueError("psi_prior entries must be probabilities in [0, 1]")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError("psi_prior must be symmetric")
    m = np.clip(m, EPS, 1.0 - EPS)
    np.fill_diagonal(m, EPS)  # self-edges undefined, kept inert
    return m


@dataclass
class SemanticModel:
    """Edge priors plus the shared observation channel, over a vocabulary.

    Immutable after construction; share freely across threads and episodes.
    """

    vocab: SignalVocabulary
    psi_prior: np.ndarray
    psi_obs_0: float = 0.001
    psi_obs_1: float = 0.15
    psi_obj_prior: np.ndarray | None = None

    def __post_init__(self):
        n = self.vocab.n_nodes
        self.psi_prior = _validate_prior_matrix(self.psi_prior, n)
        self.psi_obs_0 = clamp_prob(_check_finite("psi_obs_0", self.psi_obs_0))
        self.psi_obs_1 = clamp_prob(_check_finite("psi_obs_1", self.psi_obs_1))
        if self.vocab.n_objects:
            if self.psi_obj_prior is None:
                raise ValueError("vocabulary has object signals but psi_obj_prior is missing")
            m = np.asarray(self.psi_obj_prior, dtype=float)
            if m.shape != (n, self.vocab.n_objects):
                raise ValueError(
                    f"psi_obj_prior must be {n}x{self.vocab.n_objects}, got {m.shape}"
                )
            if not np.isfinite(m).all() or (m < 0).any() or (m > 1).any():
                raise ValueError("psi_obj_prior entries must be probabilities in [0, 1]")
            self.psi_obj_prior = np.clip(m, EPS, 1.0 - EPS)
        elif self.psi_obj_prior is not None:
            raise ValueError("psi_obj_prior given but vocabulary has no object signals")

    @property
    def n_free_parameters(self) -> int:
        """Count of free parameters: one per unordered node pair, two shared
        channel rates, and one per (node, object) containment pair."""
        n = self.vocab.n_nodes
        count = n * (n - 1) // 2 + 2
        if self.psi_obj_prior is not None:
            count += n * self.vocab.n_objects
        return count

    def prior(self, edge: tuple[int, int]) -> float:
        i, j = canonical_edge(*edge)
        if j < self.vocab.n_nodes:
            return float(self.psi_prior[i, j])
        obj = j - self.vocab.n_nodes
        if self.psi_obj_prior is None or i >= self.vocab.n_nodes or obj >= self.vocab.n_objects:
            raise ValueError(f"edge {edge} references unknown signal indices")
        return float(self.psi_obj_prior[i, obj])


def uniform_model(vocab: SignalVocabulary, prior: float = 0.5, **kwargs) -> SemanticModel:
    """Model with a flat prior on every edge; handy for tests and bootstraps."""
    n = vocab.n_nodes
    m = np.full((n, n), prior, dtype=float)
    obj = np.full((n, vocab.n_objects), prior, dtype=float) if vocab.n_objects else None
    return SemanticModel(vocab, m, psi_obj_prior=obj, **kwargs)


@dataclass
class BeliefState:
    """Posterior edge beliefs plus the accumulated observation tallies.

    Single-writer: clone one per episode. With an empty tally the belief
    equals the model prior entrywise; beliefs depend only on the per-edge
    counts, never on observation order.
    """

    model: SemanticModel
    tally: ObservationTally
    belief: np.ndarray
    obj_belief: np.ndarray | None = None

    @classmethod
    def from_model(cls, model: SemanticModel) -> "BeliefState":
        n = model.vocab.n_nodes
        return cls(
            model=model,
            tally=ObservationTally(n, model.vocab.n_objects),
            belief=model.psi_prior.copy(),
            obj_belief=None if model.psi_obj_prior is None else model.psi_obj_prior.copy(),
        )

    def clone(self) -> "BeliefState":
        return BeliefState(
            model=self.model,
            tally=self.tally.copy(),
            belief=self.belief.copy(),
            obj_belief=None if self.obj_belief is None else self.obj_belief.copy(),
        )

    def edge_belief(self, edge: tuple[int, int]) -> float:
        i, j = canonical_edge(*edge)
        if j < self.model.vocab.n_nodes:
            return float(self.belief[i, j])
        if self.obj_belief is None:
            raise ValueError(f"edge {edge} references object signals but model has none")
        return float(self.obj_belief[i, j - self.model.vocab.n_nodes])

    def _recompute(self, edge: tuple[int, int]) -> None:
        n_pos, n_neg = self.tally.counts(edge)
        p = posterior_edge(
            self.model.prior(edge), n_pos, n_neg, self.model.psi_obs_0, self.model.psi_obs_1
        )
        i, j = canonical_edge(*edge)
        if j < self.model.vocab.n_nodes:
            self.belief[i, j] = p
            self.belief[j, i] = p
        else:
            self.obj_belief[i, j - self.model.vocab.n_nodes] = p

    def digest(self) -> str:
        """Stable hash of the belief matrices, for trace records."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(np.round(self.belief, 12)).tobytes())
        if self.obj_belief is not None:
            h.update(np.ascontiguousarray(np.round(self.obj_belief, 12)).tobytes())
        return h.hexdigest()


def update_beliefs(
    state: BeliefState, new_samples: Iterable[tuple[tuple[int, int], int]]
) -> BeliefState:
    """Fold a batch of (edge, y) samples into the tallies and refresh the
    touched belief entries. Mutates and returns `state`."""
    touched = set()
    for edge, y in new_samples:
        edge = canonical_edge(*edge)
        state.tally.add(edge, y)
        touched.add(edge)
    for edge in touched:
        state._recompute(edge)
    return state


def fit_prior_mle(
    edge_samples: Mapping[tuple[int, int], Sequence[int]],
    n_nodes: int,
    smoothing: float = 1.0,
) -> np.ndarray:
    """Smoothed maximum-likelihood edge priors from binary reachability samples.

    psi[i, j] = (n_pos + a) / (n_pos + n_neg + 2a). With smoothing=0 an edge
    with no samples is an error; the result is symmetric and clamped.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    m = np.full((n_nodes, n_nodes), 0.5, dtype=float)
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            samples = edge_samples.get((i, j), ())
            n_pos = sum(1 for s in samples if s == 1)
            n = len(samples)
            if n == 0 and smoothing == 0:
                raise ValueError(f"edge ({i}, {j}) has no samples and smoothing is 0")
            p = (n_pos + smoothing) / (n + 2 * smoothing)
            m[i, j] = m[j, i] = clamp_prob(p)
    np.fill_diagonal(m, EPS)
    return m


def fit_containment_mle(
    samples: Mapping[tuple[int, int], Sequence[int]],
    n_nodes: int,
    n_objects: int,
    smoothing: float = 1.0,
) -> np.ndarray:
    """Same estimator for (room node, object) containment pairs; keys are
    (node, n_nodes + object_type)."""
    if smoothing < 0:
        raise ValueError("smoothing must be >= 0")
    m = np.empty((n_nodes, n_objects), dtype=float)
    for i in range(n_nodes):
        for o in range(n_objects):
            lst = samples.get((i, n_nodes + o), ())
            n_pos = sum(1 for s in lst if s == 1)
            n = len(lst)
            if n == 0 and smoothing == 0:
                raise ValueError(f"containment pair ({i}, obj {o}) has no samples and smoothing is 0")
            m[i, o] = clamp_prob((n_pos + smoothing) / (n + 2 * smoothing))
    return m


def _upper_triangle(m: np.ndarray) -> list[float]:
    n = m.shape[0]
    return [float(m[i, j]) for i in range(n) for j in range(i + 1, n)]


def _from_upper_triangle(values: Sequence[float], n: int) -> np.ndarray:
    expected = n * (n - 1) // 2
    if len(values) != expected:
        raise ValueError(f"psi_prior needs {expected} upper-triangle entries, got {len(values)}")
    m = np.full((n, n), EPS, dtype=float)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = float(values[k])
            k += 1
    return m


def model_to_dict(model: SemanticModel) -> dict:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "vocab": {
            "room_signals": list(model.vocab.room_signals),
            "none_signal": model.vocab.none_signal,
            "object_signals": list(model.vocab.object_signals),
        },
        "psi_prior": _upper_triangle(model.psi_prior),
        "psi_obs_0": model.psi_obs_0,
        "psi_obs_1": model.psi_obs_1,
    }
    if model.psi_obj_prior is not None:
        doc["psi_obj_prior"] = [[float(x) for x in row] for row in model.psi_obj_prior]
    return doc


def model_from_dict(doc: Mapping) -> SemanticModel:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')!r}")
    v = doc["vocab"]
    vocab = SignalVocabulary(
        tuple(v["room_signals"]),
        none_signal=v.get("none_signal", "none"),
        object_signals=tuple(v.get("object_signals", ())),
    )
    obj = doc.get("psi_obj_prior")
    return SemanticModel(
        vocab=vocab,
        psi_prior=_from_upper_triangle(doc["psi_prior"], vocab.n_nodes),
        psi_obs_0=float(doc["psi_obs_0"]),
        psi_obs_1=float(doc["psi_obs_1"]),
        psi_obj_prior=None if obj is None else np.asarray(obj, dtype=float),
    )


def save_model(path: str | Path, model: SemanticModel) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> SemanticModel:
    return model_from_dict(json.loads(Path(path).read_text()))
