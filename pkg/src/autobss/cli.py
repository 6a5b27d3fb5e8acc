"""Command-line front end.

Subcommands: `cost` (analytic FLOPs/params of one code), `search` (full
run from a config file, resumable), `candidates` (build a candidate-set
file), `bench` (paired comparison against random search on the
synthetic oracle).  Logs go to stderr; machine-readable output goes to
stdout or the requested files.  Exit codes: 0 ok, 2 usage, 3 infeasible
space, 4 evaluator failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from typing import List, Optional

from . import search as search_mod
from .candidates import save_candidates
from .config import EvaluatorSpec, load_run_spec
from .cost import Constraint, cost_of, stage_profile_csv
from .errors import (AutoBssError, CodeValidationError, ConfigError,
                     EvaluatorFailure, InfeasibleSpace)
from .evaluators import ExternalEvaluator, SyntheticOracle
from .space import format_code, parse_code, preset_space, validate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_EVALUATOR = 4

log = logging.getLogger("autobss")


def _build_evaluator(spec: EvaluatorSpec, cands, config):
    if spec.kind == "synthetic":
        seed = config.seed if spec.seed is None else spec.seed
        return SyntheticOracle.for_candidates(
            cands, seed=seed, noise_scale=spec.noise_scale,
            rugged=spec.rugged)
    space = config.space()
    return ExternalEvaluator(
        space=space, command=spec.command, exchange_dir=spec.exchange_dir,
        metric=config.metric,
        threshold=config.constraint(space).threshold,
        poll_interval=spec.poll_interval, timeout=spec.timeout)


def cmd_cost(args) -> int:
    space = preset_space(args.family, input_resolution=args.resolution)
    code = parse_code(args.code, space)
    violations = validate(code, space)
    if violations:
        for dim, value in violations:
            print(f"dimension {dim}: invalid value {value}",
                  file=sys.stderr)
        return EXIT_USAGE
    report = cost_of(code, space)
    print(f"flops={report.flops} params={report.params}")
    if args.profile:
        with open(args.profile, "w", encoding="utf-8") as fh:
            fh.write(stage_profile_csv(code, space))
        log.info("stage profile written to %s", args.profile)
    return EXIT_OK


def cmd_search(args) -> int:
    if args.resume:
        result = search_mod.resume(args.resume, _resume_evaluator(args))
        spec_journal, spec_traj = args.resume, args.trajectory
    else:
        spec = load_run_spec(args.config)
        config = spec.search
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        log.info("building candidate set (%d codes)", config.candidate_size)
        cands = search_mod.build_candidates(config)
        evaluator = _build_evaluator(spec.evaluator, cands, config)
        journal = args.journal or spec.journal
        if args.baseline == "random":
            result = search_mod.random_search(config, evaluator,
                                              journal_path=journal,
                                              candidates=cands)
        else:
            result = search_mod.run(config, evaluator, journal_path=journal,
                                    candidates=cands)
        spec_journal, spec_traj = journal, args.trajectory or spec.trajectory

    space = result.config.space()
    if spec_traj:
        search_mod.write_trajectory(result, space, spec_traj)
        log.info("trajectory written to %s", spec_traj)
    if spec_journal:
        log.info("journal at %s", spec_journal)
    print(f"best_accuracy={result.best.accuracy!r} "
          f"best_code={format_code(result.best.code, space)}")
    return EXIT_OK


def _resume_evaluator(args):
    spec = load_run_spec(args.config) if args.config else None
    records = search_mod.read_journal(args.resume)
    if not records or records[0]["record_type"] != "config":
        raise ConfigError(f"{args.resume}: not a search journal")
    config = search_mod.SearchConfig.from_payload(records[0]["payload"])
    if args.seed is not None and args.seed != config.seed:
        raise ConfigError("--seed conflicts with the journaled seed")
    cands = search_mod.build_candidates(config)
    evaluator_spec = spec.evaluator if spec else EvaluatorSpec()
    return _build_evaluator(evaluator_spec, cands, config)


def cmd_candidates(args) -> int:
    if args.size < 1:
        print("candidates: --size must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    config = search_mod.SearchConfig(
        family=args.family, metric=args.metric, threshold=args.threshold,
        candidate_size=args.size, iterations=1, batch_size=1,
        seed=args.seed or 0)
    cands = search_mod.build_candidates(config)
    save_candidates(cands, args.out)
    log.info("%d candidates written to %s", len(cands.codes), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = search_mod.SearchConfig(
        family=args.family, candidate_size=args.candidate_size,
        seed=args.seed or 0)
    log.info("building shared candidate set (%d codes)",
             config.candidate_size)
    cands = search_mod.build_candidates(config)
    rows = []
    for offset in range(args.seeds):
        seed = (args.seed or 0) + offset
        run_cfg = dataclasses.replace(config, seed=seed)
        oracle = SyntheticOracle.for_candidates(cands, seed=seed)
        auto = search_mod.run(run_cfg, oracle, candidates=cands)
        rand = search_mod.random_search(run_cfg, oracle, candidates=cands)
        rows.append((seed, auto.best.accuracy, rand.best.accuracy))
        log.info("seed %d: autobss %.4f random %.4f", *rows[-1])
    out = open(args.out, "w", encoding="utf-8", newline="") \
        if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["seed", "autobss_best", "random_best"])
        for seed, a, r in rows:
            writer.writerow([seed, repr(a), repr(r)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autobss",
        description="Constrained block-stacking search toolkit.")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured random seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", help="analytic FLOPs/params of one code")
    p.add_argument("--family", required=True)
    p.add_argument("--code", required=True,
                   help="comma-joined integers, widths before repeats")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--profile", default=None,
                   help="write a per-stage CSV breakdown here")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("search", help="run a search from a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--resume", default=None, metavar="JOURNAL")
    p.add_argument("--baseline", choices=["random"], default=None)
    p.add_argument("--journal", default=None)
    p.add_argument("--trajectory", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("candidates", help="build a candidate-set file")
    p.add_argument("--family", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--metric", default="flops")
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_candidates)

    p = sub.add_parser("bench",
                       help="paired synthetic-oracle comparison vs random")
    p.add_argument("--family", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--candidate-size", type=int, default=10000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "search" and not (args.config or args.resume):
        parser.error("search requires --config or --resume")
    try:
        return args.func(args)
    except CodeValidationError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSpace as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    except EvaluatorFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_EVALUATOR
    except AutoBssError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
