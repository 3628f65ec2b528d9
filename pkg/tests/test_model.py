"""Posterior inference, tallies, MLE fitting, and model serialization."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.model import (
    EPS,
    BeliefState,
    ObservationTally,
    SemanticModel,
    fit_containment_mle,
    fit_prior_mle,
    load_model,
    model_from_dict,
    model_to_dict,
    posterior_edge,
    save_model,
    update_beliefs,
)
from semnav.vocab import SignalVocabulary, default_vocabulary

from conftest import make_model
from oracles import posterior_by_enumeration


class TestPosteriorEdge:
    def test_no_evidence_returns_prior(self):
        assert posterior_edge(0.5, 0, 0, 0.001, 0.15) == 0.5
        assert posterior_edge(0.37, 0, 0, 0.05, 0.3) == pytest.approx(0.37)

    def test_single_positive_sample(self):
        # 0.85*0.5 / (0.85*0.5 + 0.001*0.5), straight from the Bayes formula
        expected = (0.85 * 0.5) / (0.85 * 0.5 + 0.001 * 0.5)
        got = posterior_edge(0.5, 1, 0, 0.001, 0.15)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.998825, abs=1e-6)

    def test_single_negative_sample(self):
        expected = (0.15 * 0.5) / (0.15 * 0.5 + 0.999 * 0.5)
        got = posterior_edge(0.5, 0, 1, 0.001, 0.15)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.130548, abs=1e-6)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            posterior_edge(0.0, 1, 0, 0.001, 0.15)
        with pytest.raises(ValueError):
            posterior_edge(1.0, 1, 0, 0.001, 0.15)
        with pytest.raises(ValueError):
            posterior_edge(float("nan"), 1, 0, 0.001, 0.15)
        with pytest.raises(ValueError):
            posterior_edge(0.5, 1, 0, 1.5, 0.15)
        with pytest.raises(ValueError):
            posterior_edge(0.5, -1, 0, 0.001, 0.15)

    def test_extreme_counts_stay_clamped(self):
        assert posterior_edge(0.5, 1000, 0, 0.001, 0.15) == 1.0 - EPS
        assert posterior_edge(0.5, 0, 1000, 0.001, 0.15) == EPS

    def test_matches_joint_enumeration(self):
        """Acceptance-style oracle at unit scale: the closed form equals full
        joint enumeration over every edge of a small vocabulary."""
        rng = random.Random(7)
        for _ in range(50):
            n_nodes = rng.randint(2, 4)
            edges = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
            priors = {e: rng.uniform(0.05, 0.95) for e in edges}
            tallies = {e: (rng.randint(0, 5), rng.randint(0, 5)) for e in edges}
            psi0 = rng.uniform(0.001, 0.4)
            psi1 = rng.uniform(0.001, 0.4)
            for e in edges:
                expected = posterior_by_enumeration(priors, tallies, psi0, psi1, e)
                got = posterior_edge(priors[e], tallies[e][0], tallies[e][1], psi0, psi1)
                assert got == pytest.approx(expected, abs=1e-10)

    @given(
        prior=st.floats(0.01, 0.99),
        psi0=st.floats(0.001, 0.49),
        psi1=st.floats(0.001, 0.49),
        n_pos=st.integers(0, 20),
        n_neg=st.integers(0, 20),
    )
    def test_positive_sample_never_decreases_belief(self, prior, psi0, psi1, n_pos, n_neg):
        before = posterior_edge(prior, n_pos, n_neg, psi0, psi1)
        after_pos = posterior_edge(prior, n_pos + 1, n_neg, psi0, psi1)
        after_neg = posterior_edge(prior, n_pos, n_neg + 1, psi0, psi1)
        assert after_pos >= before
        assert after_neg <= before


class TestObservationTally:
    def test_counts_are_symmetric_by_construction(self):
        tally = ObservationTally(4)
        tally.add((2, 1), 1)
        tally.add((1, 2), 0)
        assert tally.counts((1, 2)) == (1, 1)
        assert tally.counts((2, 1)) == (1, 1)

    def test_rejects_self_edges_and_unknown_indices(self):
        tally = ObservationTally(4, n_objects=1)
        with pytest.raises(ValueError):
            tally.add((2, 2), 1)
        with pytest.raises(ValueError):
            tally.add((0, 9), 1)
        tally.add((0, 4), 1)  # object edge: (node 0, object 0)
        assert tally.counts((0, 4)) == (1, 0)


class TestBeliefState:
    def test_empty_tally_equals_prior(self, small_vocab):
        model = make_model(small_vocab, prior=0.42)
        state = BeliefState.from_model(model)
        off_diag = ~np.eye(small_vocab.n_nodes, dtype=bool)
        assert np.allclose(state.belief[off_diag], 0.42)

    def test_empty_update_is_identity(self, small_vocab):
        state = BeliefState.from_model(make_model(small_vocab))
        before = state.belief.copy()
        update_beliefs(state, [])
        assert np.array_equal(state.belief, before)

    def test_update_keeps_symmetry_and_untouched_entries(self, small_vocab):
        model = make_model(small_vocab, psi_obs_0=0.001, psi_obs_1=0.15)
        state = BeliefState.from_model(model)
        update_beliefs(state, [((0, 1), 1)])
        expected = posterior_edge(0.5, 1, 0, 0.001, 0.15)
        assert state.edge_belief((0, 1)) == pytest.approx(expected)
        assert state.belief[0, 1] == state.belief[1, 0]
        assert state.edge_belief((2, 3)) == 0.5

    def test_batching_is_exchangeable(self, small_vocab):
        model = make_model(small_vocab)
        one = BeliefState.from_model(model)
        update_beliefs(one, [((0, 1), 1)])
        update_beliefs(one, [((0, 1), 0)])
        other = BeliefState.from_model(model)
        update_beliefs(other, [((0, 1), 0), ((0, 1), 1)])
        assert one.edge_belief((0, 1)) == other.edge_belief((0, 1))
        assert one.digest() == other.digest()

    @given(st.permutations([((0, 1), 1), ((0, 1), 0), ((1, 2), 1), ((0, 2), 0), ((0, 1), 1)]))
    def test_belief_invariant_to_sample_order(self, samples):
        vocab = SignalVocabulary(("a", "b", "c"))
        state = BeliefState.from_model(make_model(vocab))
        for s in samples:
            update_beliefs(state, [s])
        reference = BeliefState.from_model(make_model(vocab))
        update_beliefs(
            reference, [((0, 1), 1), ((0, 1), 1), ((0, 1), 0), ((1, 2), 1), ((0, 2), 0)]
        )
        assert np.allclose(state.belief, reference.belief, atol=1e-15)

    def test_unknown_signal_index_rejected(self, small_vocab):
        state = BeliefState.from_model(make_model(small_vocab))
        with pytest.raises(ValueError):
            update_beliefs(state, [((0, 99), 1)])

    def test_clone_isolates_updates(self, small_vocab):
        state = BeliefState.from_model(make_model(small_vocab))
        copy = state.clone()
        update_beliefs(copy, [((0, 1), 1)])
        assert state.edge_belief((0, 1)) == 0.5
        assert copy.edge_belief((0, 1)) != 0.5


class TestFitPrior:
    def test_smoothed_closed_form(self):
        samples = {(0, 1): [1] * 30 + [0] * 20}
        m = fit_prior_mle(samples, 2, smoothing=1.0)
        assert m[0, 1] == pytest.approx(31 / 52)
        assert m[1, 0] == m[0, 1]

    def test_no_samples_with_smoothing_gives_half(self):
        m = fit_prior_mle({}, 3, smoothing=1.0)
        assert m[0, 1] == 0.5
        assert m[1, 2] == 0.5

    def test_all_positive_unsmoothed_clamps(self):
        m = fit_prior_mle({(0, 1): [1] * 50}, 2, smoothing=0.0)
        assert m[0, 1] == 1.0 - EPS

    def test_zero_samples_without_smoothing_fails(self):
        with pytest.raises(ValueError):
            fit_prior_mle({(0, 1): []}, 2, smoothing=0.0)
        with pytest.raises(ValueError):
            fit_prior_mle({(0, 1): [1]}, 3, smoothing=0.0)  # (0,2) and (1,2) empty

    def test_containment_fit(self):
        samples = {(0, 3): [1, 1, 0], (1, 3): []}
        m = fit_containment_mle(samples, 3, 1, smoothing=1.0)
        assert m[0, 0] == pytest.approx(3 / 5)
        assert m[1, 0] == 0.5
        assert m.shape == (3, 1)


class TestSemanticModel:
    def test_parameter_count_roomnav(self):
        model = make_model(default_vocabulary())
        assert model.vocab.n_nodes == 9
        assert model.n_free_parameters == 38

    def test_parameter_count_with_objects(self):
        vocab = default_vocabulary(object_signals=("sofa", "bed", "car"))
        model = make_model(vocab)
        assert model.n_free_parameters == 38 + 9 * 3

    def test_rejects_asymmetric_prior(self, small_vocab):
        m = np.full((4, 4), 0.5)
        m[0, 1] = 0.9
        with pytest.raises(ValueError):
            SemanticModel(small_vocab, m)

    def test_clamps_stored_probabilities(self, small_vocab):
        m = np.full((4, 4), 0.5)
        m[0, 1] = m[1, 0] = 1.0
        m[2, 3] = m[3, 2] = 0.0
        model = SemanticModel(small_vocab, m)
        assert model.psi_prior[0, 1] == 1.0 - EPS
        assert model.psi_prior[2, 3] == EPS

    def test_missing_object_prior_rejected(self):
        vocab = SignalVocabulary(("a", "b"), object_signals=("x",))
        with pytest.raises(ValueError):
            SemanticModel(vocab, np.full((3, 3), 0.5))


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        rng = random.Random(3)
        vocab = default_vocabulary(object_signals=("sofa", "bed"))
        n = vocab.n_nodes
        m = np.full((n, n), 0.5)
        for i in range(n):
            for j in range(i + 1, n):
                m[i, j] = m[j, i] = rng.random()
        obj = np.array([[rng.random() for _ in range(2)] for _ in range(n)])
        model = SemanticModel(vocab, m, psi_obs_0=0.001, psi_obs_1=0.15, psi_obj_prior=obj)
        path = tmp_path / "model.json"
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.vocab == model.vocab
        assert np.array_equal(loaded.psi_prior, model.psi_prior)
        assert np.array_equal(loaded.psi_obj_prior, model.psi_obj_prior)
        assert loaded.psi_obs_0 == model.psi_obs_0
        assert loaded.psi_obs_1 == model.psi_obs_1
        save_model(tmp_path / "again.json", loaded)
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()

    def test_rejects_unknown_version(self):
        doc = model_to_dict(make_model(SignalVocabulary(("a", "b"))))
        doc["version"] = 99
        with pytest.raises(ValueError):
            model_from_dict(doc)

    def test_upper_triangle_length_checked(self):
        doc = model_to_dict(make_model(SignalVocabulary(("a", "b"))))
        doc["psi_prior"] = doc["psi_prior"] + [0.5]
        with pytest.raises(ValueError):
            model_from_dict(doc)
