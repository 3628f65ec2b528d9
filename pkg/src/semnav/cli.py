"""Command-line experiment pipeline.

Subcommands: gen-houses, fit-prior, tune-obs, eval, report. Exit codes:
0 success, 1 configuration error (the diagnostic names the offending field
or file), 2 unsatisfiable evaluation protocol.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import config as cfgmod
from .agents import AgentConfig
from .config import ConfigError
from .evaluate import (
    EvalReport,
    ProtocolError,
    build_protocol,
    evaluate,
    prior_table_text,
    write_records_jsonl,
)
from .learning import collect_prior_samples, tune_psi_obs, validation_episodes
from .model import (
    SemanticModel,
    fit_containment_mle,
    fit_prior_mle,
    load_model,
    save_model,
)
from .world import generate_house, read_corpus, write_corpus


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _load(args) -> dict:
    overrides = {"seed": args.seed} if args.seed is not None else None
    return cfgmod.load_config(args.config, overrides)


def _require_file(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    return path


def cmd_gen_houses(args) -> int:
    cfg = _load(args)
    gen = cfgmod.make_generator_config(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    offset = 0
    for split in ("train", "valid", "test"):
        count = cfg["corpus"][split]
        houses = [generate_house(gen, gen.seed + offset + i) for i in range(count)]
        offset += count
        write_corpus(
            args.out / f"{split}.jsonl",
            houses,
            header={"split": split, "seed": gen.seed, "config": cfg["generator"]},
        )
        print(f"wrote {count} houses to {args.out / (split + '.jsonl')}")
    return 0


def cmd_fit_prior(args) -> int:
    cfg = _load(args)
    vocab = cfgmod.make_vocab(cfg)
    houses, _ = read_corpus(_require_file(args.train, "training corpus"))
    mdl_cfg = cfg["model"]
    samples = collect_prior_samples(
        houses,
        vocab,
        explore_steps=mdl_cfg["explore_steps"],
        samples_per_edge=mdl_cfg["samples_per_edge"],
        rng_seed=cfg["seed"],
        steps_per_move=cfg["subpolicy"]["steps_per_move"],
        lateral_stay=cfg["subpolicy"]["lateral_stay"],
    )
    prior = fit_prior_mle(samples, vocab.n_nodes, smoothing=mdl_cfg["smoothing"])
    obj_prior = None
    if vocab.n_objects:
        obj_prior = fit_containment_mle(
            samples, vocab.n_nodes, vocab.n_objects, smoothing=mdl_cfg["smoothing"]
        )
    model = SemanticModel(
        vocab,
        prior,
        psi_obs_0=mdl_cfg["psi_obs_0"],
        psi_obs_1=mdl_cfg["psi_obs_1"],
        psi_obj_prior=obj_prior,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(args.out / "model.json", model)
    print(f"fitted prior over {vocab.n_nodes} signals "
          f"({model.n_free_parameters} free parameters) -> {args.out / 'model.json'}")
    return 0


def cmd_tune_obs(args) -> int:
    cfg = _load(args)
    model = load_model(_require_file(args.model, "model"))
    houses, _ = read_corpus(_require_file(args.valid, "validation corpus"))
    agent = cfgmod.make_agent_base(cfg, kind="leaps", horizon=cfg["tune"]["horizon"])
    episodes = validation_episodes(
        houses, model.vocab, n_episodes=cfg["tune"]["episodes"], rng_seed=cfg["seed"]
    )
    grid = [tuple(entry) for entry in cfg["obs_grid"]]
    psi0, psi1 = tune_psi_obs(model, grid, houses, agent, episodes, jobs=args.jobs)
    from dataclasses import replace

    tuned = replace(model, psi_obs_0=psi0, psi_obs_1=psi1)
    args.out.mkdir(parents=True, exist_ok=True)
    save_model(args.out / "model.json", tuned)
    print(f"selected psi_obs_0={psi0}, psi_obs_1={psi1} -> {args.out / 'model.json'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    model = load_model(_require_file(args.model, "model"))
    houses, _ = read_corpus(_require_file(args.test, "test corpus"))
    protocol = cfgmod.make_protocol(cfg)
    specs = build_protocol(houses, protocol, model.vocab)
    base = cfgmod.make_agent_base(cfg)
    report = evaluate(
        houses,
        specs,
        model,
        base,
        agents=protocol.agents,
        horizons=protocol.horizons,
        jobs=args.jobs,
        max_stratum=protocol.max_stratum,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.csv").write_text(report.to_csv())
    (args.out / "improvements.csv").write_text(report.improvements_csv())
    (args.out / "summary.txt").write_text(report.summary_text())
    write_records_jsonl(args.out / "episodes.jsonl", report.records)
    print(f"evaluated {len(specs)} episodes x {len(protocol.agents)} agents "
          f"x {len(protocol.horizons)} horizons -> {args.out}")
    return 0


def _plot_csvs(report_csv: Path, out: Path) -> None:
    """Pivot report.csv into plot-ready tables: success rate against plan
    distance and against birth distance, plus relative improvements."""
    rows = list(csv.DictReader(report_csv.open()))
    for stype, fname in (
        ("plan_distance", "plot_success_by_plan_distance.csv"),
        ("birth_distance", "plot_success_by_birth_distance.csv"),
    ):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["agent", "H", "x", "success_rate", "ci_lo", "ci_hi", "n"])
        for r in rows:
            if r["stratum_type"] == stype:
                writer.writerow(
                    [r["agent"], r["H"], r["stratum_value"], r["rate"], r["ci_lo"], r["ci_hi"], r["n"]]
                )
        (out / fname).write_text(buf.getvalue())
    by_key = {
        (r["agent"], r["H"], r["stratum_value"]): r
        for r in rows
        if r["stratum_type"] == "plan_distance"
    }
    agents = sorted({r["agent"] for r in rows})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "baseline", "H", "x", "relative_improvement"])
    for agent in agents:
        for base in agents:
            if base == agent:
                continue
            for (a, h, s), r in sorted(by_key.items()):
                if a != agent:
                    continue
                b = by_key.get((base, h, s))
                if b is None or float(b["rate"]) == 0:
                    continue
                imp = (float(r["rate"]) - float(b["rate"])) / float(b["rate"])
                writer.writerow([agent, base, h, s, f"{imp:.6f}"])
    (out / "plot_relative_improvement.csv").write_text(buf.getvalue())


def cmd_report(args) -> int:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.model is not None:
        model = load_model(_require_file(args.model, "model"))
        table = prior_table_text(model)
        (out / "prior_table.txt").write_text(table)
        print(table, end="")
    if args.results is not None:
        report_csv = _require_file(Path(args.results) / "report.csv", "report")
        _plot_csvs(report_csv, out)
        summary = Path(args.results) / "summary.txt"
        if summary.exists():
            print(summary.read_text(), end="")
        print(f"plot tables written to {out}")
    if args.model is None and args.results is None:
        raise ConfigError("report needs --model and/or --results")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semnav",
        description="Belief-guided semantic navigation: corpus generation, "
        "model fitting, tuning, evaluation, and reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-houses", help="generate train/valid/test house corpora")
    _add_common(p)
    p.set_defaults(func=cmd_gen_houses)

    p = sub.add_parser("fit-prior", help="fit edge priors from a training corpus")
    _add_common(p)
    p.add_argument("--train", type=Path, required=True, help="training corpus (.jsonl)")
    p.set_defaults(func=cmd_fit_prior)

    p = sub.add_parser("tune-obs", help="grid-search the observation channel rates")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="fitted model (.json)")
    p.add_argument("--valid", type=Path, required=True, help="validation corpus (.jsonl)")
    p.set_defaults(func=cmd_tune_obs)

    p = sub.add_parser("eval", help="run the stratified paired evaluation")
    _add_common(p)
    p.add_argument("--model", type=Path, required=True, help="model file (.json)")
    p.add_argument("--test", type=Path, required=True, help="test corpus (.jsonl)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="prior ranking table and plot-ready CSVs")
    _add_common(p)
    p.add_argument("--model", type=Path, default=None, help="model file (.json)")
    p.add_argument("--results", type=Path, default=None, help="eval output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
