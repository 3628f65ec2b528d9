"""Observation extraction and max-belief planning against brute force."""

import random

import numpy as np
import pytest

from semnav.model import EPS, BeliefState, SemanticModel
from semnav.planner import (
    Plan,
    best_plan,
    extract_observations,
    replan_schedule,
    signal_mask,
)
from semnav.vocab import SignalVocabulary

from conftest import make_model
from oracles import best_object_path_by_enumeration, best_path_by_enumeration


def vec(active, n):
    v = [0] * n
    for i in active:
        v[i] = 1
    return v


class TestExtractObservations:
    def test_two_active_bits(self, small_vocab):
        n = small_vocab.n_signals  # 4 nodes, no objects
        trace = [vec([0], n), vec([1], n), vec([0], n)]
        batch = extract_observations(trace, small_vocab)
        assert batch.B == (1, 1, 0, 0)
        samples = dict(batch.samples)
        assert samples[(0, 1)] == 1
        assert samples[(0, 2)] == 0 and samples[(0, 3)] == 0
        assert samples[(1, 2)] == 0 and samples[(1, 3)] == 0
        assert (2, 3) not in samples  # both unseen: no evidence

    def test_single_step_single_bit(self, small_vocab):
        batch = extract_observations([vec([2], 4)], small_vocab)
        assert all(y == 0 for _, y in batch.samples)
        assert {e for e, _ in batch.samples} == {(0, 2), (1, 2), (2, 3)}

    def test_none_bit_behaves_as_ordinary_signal(self, small_vocab):
        none = small_vocab.none_index
        batch = extract_observations([vec([none], 4)] * 3, small_vocab)
        assert batch.B == (0, 0, 0, 1)
        assert all(y == 0 for _, y in batch.samples)
        assert all(none in e for e, _ in batch.samples)

    def test_negatives_all_mode_covers_unseen_pairs(self, small_vocab):
        trace = [vec([0], 4), vec([1], 4)]
        batch = extract_observations(trace, small_vocab, negatives="all")
        samples = dict(batch.samples)
        assert samples[(2, 3)] == 0
        assert samples[(0, 1)] == 1

    def test_object_pairs_restricted_to_seen_rooms(self):
        vocab = SignalVocabulary(("a", "b"), object_signals=("x",))
        n = vocab.n_signals  # 4: a, b, none, x
        obj = vocab.object_index(0)
        trace = [vec([0, obj], n), vec([1], n)]
        batch = extract_observations(trace, vocab)
        samples = dict(batch.samples)
        assert samples[(0, obj)] == 1 and samples[(1, obj)] == 1
        unseen_room_obj = (vocab.none_index, obj)
        assert unseen_room_obj not in samples

    def test_object_negative_when_room_seen_without_object(self):
        vocab = SignalVocabulary(("a", "b"), object_signals=("x",))
        obj = vocab.object_index(0)
        batch = extract_observations([vec([0], vocab.n_signals)], vocab)
        assert dict(batch.samples)[(0, obj)] == 0

    def test_empty_trace_rejected(self, small_vocab):
        with pytest.raises(ValueError):
            extract_observations([], small_vocab)

    def test_wrong_vector_length_rejected(self, small_vocab):
        with pytest.raises(ValueError):
            extract_observations([[0, 1]], small_vocab)


def belief_from_matrix(vocab, matrix, obj_matrix=None, **kwargs):
    model = SemanticModel(
        vocab, np.asarray(matrix, dtype=float), psi_obj_prior=obj_matrix, **kwargs
    )
    return BeliefState.from_model(model)


class TestBestPlan:
    def test_goal_already_active(self, small_vocab):
        state = BeliefState.from_model(make_model(small_vocab))
        plan = best_plan(state, vec([2], 4), goal=2)
        assert plan == Plan(tau=(2,), score=1.0)
        assert plan.sub_target == 2

    def test_two_hop_beats_direct_when_product_wins(self):
        vocab = SignalVocabulary(("A", "B"))  # nodes: A, B, none=G
        m = np.array(
            [
                [0.5, 0.9, 0.5],
                [0.9, 0.5, 0.9],
                [0.5, 0.9, 0.5],
            ]
        )
        state = belief_from_matrix(vocab, m)
        plan = best_plan(state, vec([0], 3), goal=2)
        assert plan.tau == (0, 1, 2)
        assert plan.score == pytest.approx(0.81)
        assert plan.sub_target == 1

    def test_direct_wins_when_product_loses(self):
        vocab = SignalVocabulary(("A", "B"))
        m = np.array(
            [
                [0.5, 0.6, 0.5],
                [0.6, 0.5, 0.6],
                [0.5, 0.6, 0.5],
            ]
        )
        state = belief_from_matrix(vocab, m)
        plan = best_plan(state, vec([0], 3), goal=2)
        assert plan.tau == (0, 2)
        assert plan.score == pytest.approx(0.5)

    def test_tie_breaks_prefer_fewer_edges_then_lexicographic(self):
        vocab = SignalVocabulary(("A", "B", "C"))
        m = np.full((4, 4), 0.5)
        state = belief_from_matrix(vocab, m)
        plan = best_plan(state, vec([0], 4), goal=3)
        assert plan.tau == (0, 3)  # all single-hop scores tie at 0.5
        # two active sources, equal-cost direct hops: smaller index sequence
        plan = best_plan(state, vec([0, 1], 4), goal=3)
        assert plan.tau == (0, 3)

    def test_matches_enumeration_on_random_matrices(self):
        rng = random.Random(11)
        for _ in range(60):
            n_rooms = rng.randint(2, 5)  # 3..6 room-graph nodes
            vocab = SignalVocabulary(tuple(f"r{k}" for k in range(n_rooms)))
            n = vocab.n_nodes
            m = np.full((n, n), 0.5)
            for i in range(n):
                for j in range(i + 1, n):
                    m[i, j] = m[j, i] = rng.choice([0.2, 0.5, 0.5, 0.8, rng.uniform(0.05, 0.95)])
            state = belief_from_matrix(vocab, m)
            active = rng.sample(range(n), rng.randint(1, n))
            goal = rng.randrange(n)
            plan = best_plan(state, vec(active, n), goal)
            if goal in active:
                assert plan.tau == (goal,)
                continue
            cost, n_edges, path = best_path_by_enumeration(state.belief, active, goal)
            assert plan.tau == path
            expected_score = 1.0
            for a, b in zip(path, path[1:]):
                expected_score *= state.belief[a, b]
            assert plan.score == pytest.approx(expected_score, abs=1e-12)

    def test_object_goal_appends_containment_hop(self):
        vocab = SignalVocabulary(("A", "B"), object_signals=("x",))
        m = np.array(
            [
                [0.5, 0.9, 0.1],
                [0.9, 0.5, 0.1],
                [0.1, 0.1, 0.5],
            ]
        )
        obj = np.array([[0.05], [0.9], [0.05]])
        state = belief_from_matrix(vocab, m, obj_matrix=obj)
        goal = vocab.object_index(0)
        plan = best_plan(state, vec([0], 4), goal)
        assert plan.tau == (0, 1, goal)
        assert plan.score == pytest.approx(0.9 * 0.9)
        assert plan.sub_target == 1

    def test_object_goal_matches_enumeration(self):
        rng = random.Random(23)
        for _ in range(40):
            n_rooms = rng.randint(2, 4)
            vocab = SignalVocabulary(
                tuple(f"r{k}" for k in range(n_rooms)), object_signals=("x", "y")
            )
            n = vocab.n_nodes
            m = np.full((n, n), 0.5)
            for i in range(n):
                for j in range(i + 1, n):
                    m[i, j] = m[j, i] = rng.uniform(0.05, 0.95)
            obj = np.array([[rng.uniform(0.05, 0.95) for _ in range(2)] for _ in range(n)])
            state = belief_from_matrix(vocab, m, obj_matrix=obj)
            active = [rng.randrange(n)]
            o = rng.randrange(2)
            goal = vocab.object_index(o)
            plan = best_plan(state, vec(active, vocab.n_signals), goal)
            cost, n_edges, path = best_object_path_by_enumeration(
                state.belief, state.obj_belief, active, o, goal
            )
            assert plan.tau == path

    def test_object_goal_already_visible(self):
        vocab = SignalVocabulary(("A", "B"), object_signals=("x",))
        state = belief_from_matrix(
            vocab, np.full((3, 3), 0.5), obj_matrix=np.full((3, 1), 0.5)
        )
        goal = vocab.object_index(0)
        plan = best_plan(state, vec([0, goal], 4), goal)
        assert plan.tau == (goal,) and plan.score == 1.0

    def test_monotone_belief_response(self):
        """Raising one edge belief never lowers the optimal score to any goal."""
        rng = random.Random(5)
        vocab = SignalVocabulary(("a", "b", "c", "d"))
        n = vocab.n_nodes
        for _ in range(30):
            m = np.full((n, n), 0.5)
            for i in range(n):
                for j in range(i + 1, n):
                    m[i, j] = m[j, i] = rng.uniform(0.1, 0.9)
            state = belief_from_matrix(vocab, m)
            i, j = sorted(rng.sample(range(n), 2))
            raised = m.copy()
            raised[i, j] = raised[j, i] = min(0.95, m[i, j] + 0.3)
            raised_state = belief_from_matrix(vocab, raised)
            for goal in range(n):
                for src in range(n):
                    if src == goal:
                        continue
                    a = best_plan(state, vec([src], n), goal).score
                    b = best_plan(raised_state, vec([src], n), goal).score
                    assert b >= a - 1e-12

    def test_long_minimum_belief_paths_stay_finite_and_ordered(self):
        """A 20-edge chain at the clamp floor keeps a finite score, and the
        one-hop path at the same floor still beats it."""
        vocab = SignalVocabulary(tuple(f"r{k}" for k in range(20)))  # 21 nodes
        n = vocab.n_nodes
        m = np.full((n, n), EPS)
        state = belief_from_matrix(vocab, m)
        plan = best_plan(state, vec([0], n), goal=n - 1)
        assert plan.tau == (0, n - 1)  # fewest hops at equal per-edge belief
        assert 0.0 < plan.score < 1.0
        chain_score = 1.0
        for _ in range(20):
            chain_score *= EPS
        assert chain_score > 0.0  # representable
        assert plan.score > chain_score

    def test_invariant_under_monotone_transform(self):
        """Raising all beliefs to a power rescales -log weights by a constant
        and must not change the argmax path."""
        rng = random.Random(17)
        vocab = SignalVocabulary(("a", "b", "c", "d"))
        n = vocab.n_nodes
        for power in (0.5, 2.0):
            for _ in range(20):
                m = np.full((n, n), 0.5)
                for i in range(n):
                    for j in range(i + 1, n):
                        m[i, j] = m[j, i] = rng.uniform(0.1, 0.9)
                state = belief_from_matrix(vocab, m)
                transformed = belief_from_matrix(vocab, np.power(m, power))
                src = rng.randrange(n)
                goal = (src + 1) % n
                assert (
                    best_plan(state, vec([src], n), goal).tau
                    == best_plan(transformed, vec([src], n), goal).tau
                )

    def test_no_active_signal_rejected(self, small_vocab):
        state = BeliefState.from_model(make_model(small_vocab))
        with pytest.raises(ValueError):
            best_plan(state, vec([], 4), goal=1)


class TestReplanSchedule:
    def test_boundary(self):
        assert replan_schedule(30, 30)
        assert replan_schedule(60, 30)
        assert not replan_schedule(17, 30)

    def test_early_replan_on_subtarget(self):
        assert replan_schedule(17, 30, sub_target_reached=True)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            replan_schedule(10, 0)


def test_signal_mask_validates_bits():
    with pytest.raises(ValueError):
        signal_mask([0, 2, 0])
