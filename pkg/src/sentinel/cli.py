"""Command line interface: sentinel generate|fit-priors|score|evaluate.

Exit codes: 0 success, 2 config or missing-input error, 3 prior fitting
exceeded the failure budget, 4 more than 5% of curve scorings failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time

from .bazin import FitFailureRateExceededError
from .config import ConfigError, load_config
from .pipeline import run_evaluate, run_fit_priors, run_generate, run_score

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRIOR_FAILURES = 3
EXIT_SCORE_FAILURES = 4

MAX_SCORE_FAILURE_RATE = 0.05

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentinel",
        description="Real-time transient anomaly detection pipeline")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config file (YAML)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        return p

    add("generate", "generate the synthetic population and train/test split")
    add("fit-priors", "fit one population prior per trained class")
    p_score = add("score", "score test transients against trained class models")
    p_score.add_argument("--model", choices=["bazin", "external"], default="bazin")
    p_score.add_argument("--jobs", type=int, default=1,
                         help="parallel scoring workers (results are identical)")
    p_eval = add("evaluate", "compute ROC/AUC and histogram tables from scores")
    p_eval.add_argument("--model", default=None,
                        help="evaluate only this model's scores (default: all found)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            print("config error: seed must be non-negative", file=sys.stderr)
            return EXIT_CONFIG
        gen = dataclasses.replace(cfg.gen, seed=args.seed)
        cfg = dataclasses.replace(cfg, seed=args.seed, gen=gen)

    t_start = time.perf_counter()
    try:
        if args.command == "generate":
            n_train, n_test = run_generate(cfg)
            print(f"wrote {cfg.train_csv} ({n_train} curves) and "
                  f"{cfg.test_csv} ({n_test} curves)")
        elif args.command == "fit-priors":
            priors = run_fit_priors(cfg)
            for name in sorted(priors):
                print(f"wrote {cfg.prior_path(name)}")
        elif args.command == "score":
            rate = run_score(cfg, model=args.model, jobs=args.jobs)
            print(f"scored with {args.model} model; curve failure rate {rate:.1%}")
            if rate > MAX_SCORE_FAILURE_RATE:
                print(f"failure rate exceeds {MAX_SCORE_FAILURE_RATE:.0%}; "
                      f"see {cfg.scores_dir(args.model) / 'failures.csv'}",
                      file=sys.stderr)
                return EXIT_SCORE_FAILURES
        elif args.command == "evaluate":
            models = [args.model] if args.model else None
            summaries = run_evaluate(cfg, models)
            for model, res in sorted(summaries.items()):
                if res["notice"]:
                    print(f"{model}: {res['notice']}")
                for ac, auc in sorted(res["anomaly_auc"].items()):
                    print(f"{model}: AUC[{ac}] = {auc:.3f}")
                if res["null_auc"] is not None:
                    print(f"{model}: AUC[null control] = {res['null_auc']:.3f}")
            print(f"metrics written under {cfg.output_dir / 'metrics'}")
    except FitFailureRateExceededError as err:
        print(f"prior fitting failed: {err}", file=sys.stderr)
        return EXIT_PRIOR_FAILURES
    except (FileNotFoundError, ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    logger.info("%s finished in %.1f s", args.command, time.perf_counter() - t_start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
