"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline, synth
from .config import PipelineConfig


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", required=True, help="run config YAML")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowsentry",
        description="Benign-only detector ensemble with weighted voting, "
        "pseudo-label refinement, and explanations.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="load, clean, encode, scale, and split the data")
    _add_config_arg(p)

    p = sub.add_parser("train-ensemble", help="build and weigh the detector ensemble")
    _add_config_arg(p)

    p = sub.add_parser("evaluate", help="score the ensemble on the test split")
    _add_config_arg(p)
    p.add_argument("--mode", choices=["MV", "WMV"], default=None)

    p = sub.add_parser("refine", help="train the second-stage forest from pseudo-labels")
    _add_config_arg(p)
    p.add_argument("--pseudo-mode", choices=["oracle", "reviewed", "raw"], default=None)
    p.add_argument(
        "--auto-accept",
        action="store_true",
        help="reviewed mode: approve every pending item unattended",
    )

    p = sub.add_parser("evaluate-final", help="evaluate the combined framework")
    _add_config_arg(p)

    p = sub.add_parser("explain", help="local explanations for test flows")
    _add_config_arg(p)
    p.add_argument("--ids", type=int, nargs="*", help="test row indices to explain")
    p.add_argument("--errors", action="store_true", help="explain every misclassified flow")

    p = sub.add_parser("surrogate", help="global surrogate tree, rules, and fidelity")
    _add_config_arg(p)

    p = sub.add_parser("serve-review", help="run the analyst review HTTP service")
    _add_config_arg(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8341)

    p = sub.add_parser("run", help="prepare through evaluate-final in one go")
    _add_config_arg(p)
    p.add_argument("--pseudo-mode", choices=["oracle", "reviewed", "raw"], default=None)
    p.add_argument("--auto-accept", action="store_true")

    p = sub.add_parser("synth-data", help="write a synthetic demo corpus + config")
    p.add_argument("--out", required=True, help="target directory")
    p.add_argument("--train-rows", type=int, default=4000)
    p.add_argument("--test-rows", type=int, default=2500)
    p.add_argument("--seed", type=int, default=7)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "synth-data":
            paths = synth.write_corpus(
                args.out, n_train=args.train_rows, n_test=args.test_rows, seed=args.seed
            )
            print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
            return 0

        config = PipelineConfig.from_yaml(args.config)
        if args.command == "prepare":
            result = pipeline.cmd_prepare(config)
        elif args.command == "train-ensemble":
            result = pipeline.cmd_train_ensemble(config)
        elif args.command == "evaluate":
            result = pipeline.cmd_evaluate(config, mode=args.mode)
        elif args.command == "refine":
            result = pipeline.cmd_refine(
                config, pseudo_mode=args.pseudo_mode, auto_accept=args.auto_accept
            )
        elif args.command == "evaluate-final":
            result = pipeline.cmd_evaluate_final(config)
        elif args.command == "explain":
            exps = pipeline.cmd_explain(config, instance_ids=args.ids, errors=args.errors)
            for e in exps:
                print(e.to_text())
            return 0
        elif args.command == "surrogate":
            result = pipeline.cmd_surrogate(config)
        elif args.command == "serve-review":
            pipeline.serve_review(config, host=args.host, port=args.port)
            return 0
        elif args.command == "run":
            result = {
                "prepare": pipeline.cmd_prepare(config),
                "train_ensemble": pipeline.cmd_train_ensemble(config),
                "evaluate_mv": pipeline.cmd_evaluate(config, mode="MV"),
                "evaluate_wmv": pipeline.cmd_evaluate(config, mode="WMV"),
                "refine": pipeline.cmd_refine(
                    config, pseudo_mode=args.pseudo_mode, auto_accept=args.auto_accept
                ),
                "final": pipeline.cmd_evaluate_final(config),
                "surrogate": pipeline.cmd_surrogate(config),
            }
        else:  # pragma: no cover
            raise AssertionError(args.command)
        print(json.dumps(result, indent=2, default=str))
        return 0
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except pipeline.PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # keep CLI failures diagnosable
        logging.getLogger(__name__).exception("command failed")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
