"""Belief-guided semantic navigation in simulated house worlds.

A Bayesian latent graph over semantic signals (room types, objects) is
learned from training houses, updated online from noisy exploration windows,
and used by a replanning agent to chain sub-policies toward a goal signal.
"""

from .agents import (
    AGENT_KINDS,
    AgentConfig,
    EpisodeResult,
    run_baseline_episode,
    run_episode,
    run_leaps_episode,
)
from .evaluate import (
    EvalProtocol,
    EvalReport,
    ProtocolError,
    build_protocol,
    evaluate,
    report_prior,
    wilson_interval,
)
from .learning import collect_prior_samples, tune_psi_obs
from .model import (
    BeliefState,
    ObservationTally,
    SemanticModel,
    fit_containment_mle,
    fit_prior_mle,
    load_model,
    posterior_edge,
    save_model,
    update_beliefs,
)
from .planner import ObservationBatch, Plan, best_plan, extract_observations, replan_schedule
from .vocab import DEFAULT_ROOM_SIGNALS, SignalVocabulary, default_vocabulary
from .world import (
    ExtractorNoise,
    GeneratorConfig,
    HouseContext,
    SubPolicyProfile,
    generate_house,
    noisy_signal,
    optimal_plan_steps,
    random_walk,
    read_corpus,
    step_subpolicy,
    true_signal,
    write_corpus,
)

__version__ = "0.1.0"
