"""Episode protocols, paired evaluation, confidence intervals, and reports.

Every agent sees the identical list of (house, start, goal, seed) episode
specs, so differences in measured success are attributable to the agent
alone. Success rates are reported per plan-distance stratum with Wilson 95%
intervals.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

from .agents import AgentConfig, EpisodeResult, run_episode
from .model import SemanticModel
from .vocab import SignalVocabulary
from .world import HouseContext, optimal_plan_steps


@dataclass(frozen=True)
class EpisodeSpec:
    house_index: int
    start: int
    goal: int
    seed: int
    plan_steps: int


@dataclass
class EvalProtocol:
    """How the episode pool is built: a uniform base pool topped up until
    every plan-distance stratum 1..max_stratum holds at least the floor."""

    base_episodes: int = 5000
    stratum_floor: int = 500
    max_stratum: int = 5
    horizons: tuple[int, ...] = (300, 500, 1000)
    agents: tuple[str, ...] = ("leaps", "pure_subpolicy", "random", "oracle_graph")
    seed: int = 0
    goal_kind: str = "room"  # or "object"

    def __post_init__(self):
        if self.base_episodes < 0 or self.stratum_floor < 0:
            raise ValueError("episode counts must be non-negative")
        if self.max_stratum < 1:
            raise ValueError("max_stratum must be >= 1")
        if self.goal_kind not in ("room", "object"):
            raise ValueError("goal_kind must be 'room' or 'object'")


class ProtocolError(Exception):
    """Raised when the corpus cannot satisfy the stratification floor."""

    def __init__(self, message: str, achievable: dict[int, int]):
        super().__init__(message)
        self.achievable = achievable


def _candidate_pairs(
    houses: Sequence[HouseContext], vocab: SignalVocabulary, goal_kind: str, max_stratum: int
) -> tuple[list[tuple[int, int, int, int]], dict[int, list[tuple[int, int, int, int]]]]:
    """All (house, start, goal, plan_steps) with plan_steps >= 1, plus the
    same pool bucketed by capped stratum."""
    if goal_kind == "room":
        goals = list(range(vocab.n_rooms))
    else:
        goals = [vocab.object_index(o) for o in range(vocab.n_objects)]
        if not goals:
            raise ValueError("object-goal protocol needs a vocabulary with object signals")
    pool = []
    by_stratum: dict[int, list] = {s: [] for s in range(1, max_stratum + 1)}
    for hi, house in enumerate(houses):
        for goal in goals:
            if not house.rooms_with_signal(goal):
                continue
            for start in house.spawn:
                d = optimal_plan_steps(house, start, goal)
                if d is None or d < 1:
                    continue
                item = (hi, start, goal, d)
                pool.append(item)
                by_stratum[min(d, max_stratum)].append(item)
    return pool, by_stratum


def build_protocol(
    houses: Sequence[HouseContext], protocol: EvalProtocol, vocab: SignalVocabulary
) -> list[EpisodeSpec]:
    """Sample the episode pool: `base_episodes` uniform draws, then round-robin
    top-up of plan-distance strata below the floor. Every episode carries its
    own fixed seed so agent comparisons are paired."""
    if not houses:
        raise ValueError("test corpus is empty")
    rng = random.Random(protocol.seed)
    pool, by_stratum = _candidate_pairs(houses, vocab, protocol.goal_kind, protocol.max_stratum)
    if not pool:
        raise ProtocolError("no valid (start, goal) episode exists in the corpus", {})
    specs: list[EpisodeSpec] = []

    def add(item):
        hi, start, goal, d = item
        specs.append(EpisodeSpec(hi, start, goal, rng.getrandbits(63), d))

    for _ in range(protocol.base_episodes):
        add(pool[rng.randrange(len(pool))])

    if protocol.stratum_floor > 0:
        counts = Counter(min(s.plan_steps, protocol.max_stratum) for s in specs)
        deficient = [
            s
            for s in range(1, protocol.max_stratum + 1)
            if counts[s] < protocol.stratum_floor
        ]
        impossible = {s: counts[s] for s in deficient if not by_stratum[s]}
        if impossible:
            achievable = {
                s: counts[s] + (protocol.stratum_floor if by_stratum[s] else 0)
                for s in range(1, protocol.max_stratum + 1)
            }
            raise ProtocolError(
                "corpus cannot satisfy the stratification floor; achievable counts: "
                + ", ".join(f"stratum {s}: {c}" for s, c in sorted(achievable.items())),
                achievable,
            )
        while deficient:
            for s in list(deficient):
                bucket = by_stratum[s]
                add(bucket[rng.randrange(len(bucket))])
                counts[s] += 1
                if counts[s] >= protocol.stratum_floor:
                    deficient.remove(s)
    return specs


# --- running episodes --------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(config, model, houses, specs):
    _WORKER_STATE.update(config=config, model=model, houses=houses, specs=specs)


def _run_indexed(idx: int):
    st = _WORKER_STATE
    spec = st["specs"][idx]
    result = run_episode(
        st["config"], st["model"], st["houses"][spec.house_index], spec.start, spec.goal, spec.seed
    )
    return idx, result.success, result.steps, result.optimal_plan_steps, result.geodesic_distance


def run_agent_on_specs(
    config: AgentConfig,
    model: SemanticModel | None,
    houses: Sequence[HouseContext],
    specs: Sequence[EpisodeSpec],
    jobs: int = 1,
) -> list[EpisodeResult]:
    """Run one agent over the full spec list, optionally across processes.
    Results come back in spec order regardless of job count."""
    if jobs <= 1:
        return [
            run_episode(config, model, houses[s.house_index], s.start, s.goal, s.seed)
            for s in specs
        ]
    out: list[EpisodeResult | None] = [None] * len(specs)
    with Pool(jobs, initializer=_init_worker, initargs=(config, model, houses, list(specs))) as pool:
        for idx, success, steps, opt, geo in pool.imap_unordered(
            _run_indexed, range(len(specs)), chunksize=64
        ):
            out[idx] = EpisodeResult(success, steps, specs[idx].goal, opt, geo)
    return out  # type: ignore[return-value]


# --- aggregation -------------------------------------------------------------

def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    if not 0 <= successes <= n:
        raise ValueError("successes must be between 0 and n")
    p = successes / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    margin = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - margin), min(1.0, center + margin)


@dataclass(frozen=True)
class EpisodeRecord:
    agent: str
    horizon: int
    episode: int
    house_index: int
    start: int
    goal: int
    plan_steps: int
    stratum: int
    birth_distance: int
    success: bool
    steps: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "agent": self.agent,
            "H": self.horizon,
            "episode": self.episode,
            "house": self.house_index,
            "start": self.start,
            "goal": self.goal,
            "plan_steps": self.plan_steps,
            "stratum": self.stratum,
            "birth_distance": self.birth_distance,
            "success": int(self.success),
            "steps": self.steps,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class StratumRow:
    agent: str
    horizon: int
    stratum_type: str
    stratum_value: int
    n: int
    successes: int
    rate: float
    ci_lo: float
    ci_hi: float


CSV_HEADER = "agent,H,stratum_type,stratum_value,n,successes,rate,ci_lo,ci_hi"


@dataclass
class EvalReport:
    """Per-stratum success rates with intervals, plus the raw episode grid."""

    records: list[EpisodeRecord]
    rows: list[StratumRow] = field(default_factory=list)

    def __post_init__(self):
        if not self.rows:
            self.rows = _aggregate(self.records)

    def rate(self, agent: str, horizon: int, stratum: int | None = None) -> float | None:
        stype = "overall" if stratum is None else "plan_distance"
        svalue = 0 if stratum is None else stratum
        for row in self.rows:
            if (
                row.agent == agent
                and row.horizon == horizon
                and row.stratum_type == stype
                and row.stratum_value == svalue
            ):
                return row.rate
        return None

    def row(self, agent: str, horizon: int, stratum: int) -> StratumRow | None:
        for r in self.rows:
            if (
                r.agent == agent
                and r.horizon == horizon
                and r.stratum_type == "plan_distance"
                and r.stratum_value == stratum
            ):
                return r
        return None

    def relative_improvement(
        self, agent: str, baseline: str, horizon: int, stratum: int | None = None
    ) -> float | None:
        """(rate_agent - rate_baseline) / rate_baseline; None if the baseline
        never succeeds in the stratum."""
        a = self.rate(agent, horizon, stratum)
        b = self.rate(baseline, horizon, stratum)
        if a is None or b is None or b == 0:
            return None
        return (a - b) / b

    def strata(self) -> list[int]:
        return sorted(
            {r.stratum_value for r in self.rows if r.stratum_type == "plan_distance"}
        )

    def agents(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.agent not in seen:
                seen.append(r.agent)
        return seen

    def horizons(self) -> list[int]:
        return sorted({r.horizon for r in self.records})

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in sorted(
            self.rows,
            key=lambda r: (r.agent, r.horizon, r.stratum_type, r.stratum_value),
        ):
            lines.append(
                f"{r.agent},{r.horizon},{r.stratum_type},{r.stratum_value},"
                f"{r.n},{r.successes},{r.rate:.6f},{r.ci_lo:.6f},{r.ci_hi:.6f}"
            )
        return "\n".join(lines) + "\n"

    def improvements_csv(self, baselines: Sequence[str] | None = None) -> str:
        """Relative improvement of every agent over every (other) baseline,
        per horizon and plan-distance stratum."""
        agents = self.agents()
        baselines = list(baselines) if baselines is not None else agents
        lines = ["agent,baseline,H,stratum_type,stratum_value,improvement"]
        for agent in agents:
            for base in baselines:
                if base == agent:
                    continue
                for h in self.horizons():
                    for s in self.strata():
                        imp = self.relative_improvement(agent, base, h, s)
                        val = "" if imp is None else f"{imp:.6f}"
                        lines.append(f"{agent},{base},{h},plan_distance,{s},{val}")
        return "\n".join(lines) + "\n"

    def summary_text(self) -> str:
        out = []
        for h in self.horizons():
            out.append(f"horizon H={h}")
            header = f"  {'agent':<16}" + "".join(
                f"  d={s:<12}" for s in self.strata()
            ) + "  overall"
            out.append(header)
            for agent in self.agents():
                cells = []
                for s in self.strata():
                    row = self.row(agent, h, s)
                    cells.append(
                        "  " + (f"{row.rate:.3f} (n={row.n})".ljust(14) if row else "-".ljust(14))
                    )
                overall = self.rate(agent, h)
                cells.append(f"  {overall:.3f}" if overall is not None else "  -")
                out.append(f"  {agent:<16}" + "".join(cells))
            out.append("")
        return "\n".join(out)


def _aggregate(records: Sequence[EpisodeRecord]) -> list[StratumRow]:
    buckets: dict[tuple, list[EpisodeRecord]] = {}
    for r in records:
        buckets.setdefault((r.agent, r.horizon, "plan_distance", r.stratum), []).append(r)
        buckets.setdefault((r.agent, r.horizon, "birth_distance", r.birth_distance), []).append(r)
        buckets.setdefault((r.agent, r.horizon, "overall", 0), []).append(r)
    rows = []
    for (agent, horizon, stype, svalue), recs in sorted(buckets.items()):
        n = len(recs)
        successes = sum(r.success for r in recs)
        lo, hi = wilson_interval(successes, n)
        rows.append(
            StratumRow(agent, horizon, stype, svalue, n, successes, successes / n, lo, hi)
        )
    return rows


def evaluate(
    houses: Sequence[HouseContext],
    specs: Sequence[EpisodeSpec],
    model: SemanticModel | None,
    base_config: AgentConfig,
    agents: Sequence[str],
    horizons: Sequence[int],
    jobs: int = 1,
    max_stratum: int = 5,
) -> EvalReport:
    """Paired evaluation: every (agent, horizon) runs the identical specs."""
    records: list[EpisodeRecord] = []
    for kind in agents:
        for h in horizons:
            config = replace(base_config, kind=kind, horizon=h)
            results = run_agent_on_specs(config, model, houses, specs, jobs=jobs)
            for i, (spec, res) in enumerate(zip(specs, results)):
                records.append(
                    EpisodeRecord(
                        agent=kind,
                        horizon=h,
                        episode=i,
                        house_index=spec.house_index,
                        start=spec.start,
                        goal=spec.goal,
                        plan_steps=spec.plan_steps,
                        stratum=min(spec.plan_steps, max_stratum),
                        birth_distance=res.geodesic_distance
                        if res.geodesic_distance is not None
                        else -1,
                        success=res.success,
                        steps=res.steps,
                        seed=spec.seed,
                    )
                )
    return EvalReport(records)


def report_prior(model: SemanticModel, top: int = 3) -> list[dict]:
    """Per room-graph signal: its most and least likely neighbors by prior.
    One row per signal (K+1 rows for a K-room vocabulary)."""
    vocab = model.vocab
    n = vocab.n_nodes
    rows = []
    for i in range(n):
        others = [(float(model.psi_prior[i, j]), vocab.name(j)) for j in range(n) if j != i]
        ranked = sorted(others, key=lambda t: (-t[0], t[1]))
        rows.append(
            {
                "signal": vocab.name(i),
                "top": [(name, p) for p, name in ranked[:top]],
                "bottom": [(name, p) for p, name in ranked[-top:]],
            }
        )
    return rows


def prior_table_text(model: SemanticModel, top: int = 3) -> str:
    lines = []
    for row in report_prior(model, top):
        tops = ", ".join(f"{name} ({p:.3f})" for name, p in row["top"])
        bots = ", ".join(f"{name} ({p:.3f})" for name, p in row["bottom"])
        lines.append(f"{row['signal']:<14} most likely: {tops}")
        lines.append(f"{'':<14} least likely: {bots}")
    return "\n".join(lines) + "\n"


def write_records_jsonl(path: str | Path, records: Sequence[EpisodeRecord]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
