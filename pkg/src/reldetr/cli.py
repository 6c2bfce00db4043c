"""Command-line interface for reldetr."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np

from reldetr import __version__
from reldetr.checkpoint import save_parameters
from reldetr.contracts import SCHEMA_VERSION, validate_encode_output
from reldetr.errors import IngestionError, NumericError
from reldetr.geom import relation_matrix, validate_box_array
from reldetr.logging_utils import LogOptions, configure_logging
from reldetr.mcstat.coco import load_annotations
from reldetr.mcstat.stats import DEFAULT_BINS, dataset_mc, write_records_csv, write_summary_json
from reldetr.numkit.tensor import ParameterSet
from reldetr.profiles import DEFAULT_PROFILE, Profile, list_profiles, profile_names
from reldetr.relenc import encode_relation, init_relation_params, sincos_embed, top_related
from reldetr.rng import SeedTree
from reldetr.run_config import RunConfig, load_run_config, resolve_profile
from reldetr.toyexp.models import VARIANTS
from reldetr.toyexp.train import run_experiment, write_report
from reldetr.verify import SUITES, format_results, run_suites

LOGGER = logging.getLogger("reldetr.cli")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return number


def _non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return number


def _add_mc_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the dataset MC subcommand."""
    mc = subparsers.add_parser("mc", help="Compute per-image MC over COCO annotations.")
    mc.add_argument("annotations", help="COCO-format annotation JSON.")
    mc.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS, help="Histogram bins.")
    mc.add_argument("--out-csv", help="Write image_id,n_objects,mc rows here.")
    mc.add_argument("--out-summary", help="Write the summary JSON here.")
    mc.add_argument(
        "--jobs",
        type=_non_negative_int,
        default=1,
        help="Worker threads (0 = one per CPU). Output does not depend on it.",
    )
    mc.add_argument(
        "--format",
        choices=("text", "json"),
        default="text",
        help="Format of the summary printed to stdout.",
    )


def _add_encode_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the relation encoding inspection subcommand."""
    encode = subparsers.add_parser("encode", help="Dump relation features and bias for boxes.")
    encode.add_argument("boxes", help="JSON array of [x, y, w, h] boxes.")
    encode.add_argument("--profile", choices=profile_names(), default="paper")
    encode.add_argument("--config", help="JSON overrides merged over the profile.")
    encode.add_argument("--seed", type=_non_negative_int, default=0)
    encode.add_argument("--out", default="-", help="Output path or '-' for stdout.")
    encode.add_argument("--query", type=_non_negative_int, help="Report boxes related to INDEX.")
    encode.add_argument("--top-k", type=_positive_int, default=3)
    encode.add_argument("--head", type=_non_negative_int, help="Rank by one head only.")


def _add_toy_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the toy experiment subcommand."""
    toy = subparsers.add_parser("toy", help="Train the toy decoder on synthetic scenes.")
    toy.add_argument("--variant", choices=VARIANTS, default="relation+contrast")
    toy.add_argument("--steps", type=_positive_int, default=200)
    toy.add_argument("--seed", type=_non_negative_int, default=0)
    toy.add_argument("--profile", choices=profile_names(), default=DEFAULT_PROFILE)
    toy.add_argument("--config", help="JSON overrides merged over the profile.")
    toy.add_argument("--lr", type=float, help="Learning rate override.")
    toy.add_argument("--momentum", type=float, help="Momentum override (0 = plain descent).")
    toy.add_argument(
        "--classification",
        choices=("quality_focal", "focal"),
        help="Classification loss override.",
    )
    toy.add_argument("--out", help="Write the report JSON here.")
    toy.add_argument("--save-checkpoint", help="Write trained parameters here.")
    toy.add_argument(
        "--timing",
        action="store_true",
        help="Record wall_ms in the report (reports are then no longer byte-stable).",
    )


def _add_verify_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the verification subcommand."""
    verify = subparsers.add_parser("verify", help="Run property and oracle suites.")
    verify.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    verify.add_argument("--jobs", type=_non_negative_int, default=1)
    verify.add_argument("--out", help="Write case results as JSON here.")


def _add_profiles_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the profile listing subcommand."""
    profiles = subparsers.add_parser("profiles", help="List configuration profiles.")
    profiles.add_argument("--format", choices=("text", "json"), default="text")


def _add_version_parser(subparsers: argparse._SubParsersAction) -> None:
    """Register the version subcommand."""
    subparsers.add_parser("version", help="Print the current version.")


def _argv_has_flag(argv: list[str], *flags: str) -> bool:
    for token in argv:
        for flag in flags:
            if token == flag or token.startswith(f"{flag}="):
                return True
    return False


def _resolve_profile(args: argparse.Namespace, argv: list[str]) -> Profile:
    """Merge ``--config`` over the profile; explicit flags win over the file."""
    config: RunConfig | None = None
    if getattr(args, "config", None):
        config = load_run_config(Path(args.config))
        if config.profile and not _argv_has_flag(argv, "--profile"):
            args.profile = config.profile
        if config.seed is not None and not _argv_has_flag(argv, "--seed"):
            args.seed = config.seed
    profile = resolve_profile(args.profile, config)
    if args.command != "toy":
        return profile
    train_updates: dict[str, Any] = {}
    if args.lr is not None:
        train_updates["lr"] = args.lr
    if args.momentum is not None:
        train_updates["momentum"] = args.momentum
    if train_updates:
        profile = replace(profile, train=replace(profile.train, **train_updates))
    if args.classification:
        profile = replace(profile, loss=replace(profile.loss, classification=args.classification))
    return profile


def _write_json(payload: Any, destination: str) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if destination == "-":
        sys.stdout.write(text)
        return
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_mc(args: argparse.Namespace) -> int:
    """Compute the MC distribution of an annotation file."""
    try:
        annotations = load_annotations(Path(args.annotations))
    except IngestionError as exc:
        LOGGER.error("%s", exc)
        return EXIT_INPUT
    result = dataset_mc(annotations, jobs=args.jobs, bins=args.bins)
    summary = result.summary
    try:
        if args.out_csv:
            write_records_csv(result.records, Path(args.out_csv))
        if args.out_summary:
            write_summary_json(summary, Path(args.out_summary))
    except OSError as exc:
        LOGGER.error("Failed to write output: %s", exc)
        return EXIT_INPUT
    if args.format == "json":
        _write_json(summary.as_dict(), "-")
        return EXIT_OK
    print(f"images: {summary.n_images} (skipped {summary.n_skipped})")
    if summary.no_data:
        print("no data")
        return EXIT_OK
    print(f"mean MC: {summary.mean!r}")
    print(f"median MC: {summary.median!r}")
    return EXIT_OK


def _load_boxes(path: Path) -> np.ndarray:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"{path}: cannot read file ({exc.strerror or exc})") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(payload, list) or not payload:
        raise ValueError(f"{path}: expected a non-empty JSON array of [x, y, w, h] boxes")
    try:
        boxes = np.asarray(payload, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: boxes must be arrays of 4 numbers") from exc
    try:
        return validate_box_array(boxes)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def cmd_encode(args: argparse.Namespace, profile: Profile) -> int:
    """Print relation features, embedding shape and bias for a box list."""
    try:
        boxes = _load_boxes(Path(args.boxes))
    except ValueError as exc:
        LOGGER.error("%s", exc)
        return EXIT_INPUT
    cfg = profile.relenc
    params = ParameterSet()
    init_relation_params(params, cfg, SeedTree(args.seed).child("params").generator("relenc"))
    features = relation_matrix(boxes, boxes)
    embedding = sincos_embed(features, cfg)
    bias = encode_relation(boxes, boxes, params, cfg)
    payload: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "profile": profile.name,
            "epsilon": cfg.epsilon,
            "seed": args.seed,
            "relenc": cfg.as_dict(),
            "note": "every bias entry is floored at epsilon",
        },
        "boxes": boxes.tolist(),
        "features": features.values.tolist(),
        "feature_shape": list(features.shape),
        "embedding_shape": list(embedding.shape),
        "bias": bias.values.data.tolist(),
        "bias_shape": list(bias.shape),
    }
    if args.query is not None:
        if args.head is not None and args.head >= cfg.heads:
            LOGGER.error("head %s out of range for %s heads", args.head, cfg.heads)
            return EXIT_INPUT
        try:
            neighbors = top_related(bias, args.query, args.top_k, head=args.head)
        except IndexError as exc:
            LOGGER.error("%s", exc)
            return EXIT_INPUT
        payload["top_related"] = {
            "query": args.query,
            "head": args.head,
            "neighbors": [{"index": index, "weight": weight} for index, weight in neighbors],
        }
    validate_encode_output(payload)
    try:
        _write_json(payload, args.out)
    except OSError as exc:
        LOGGER.error("Failed to write output: %s", exc)
        return EXIT_INPUT
    return EXIT_OK


def cmd_toy(args: argparse.Namespace, profile: Profile) -> int:
    """Run one toy experiment and write its report."""
    try:
        report, model = run_experiment(
            args.variant, args.steps, args.seed, profile, timing=args.timing
        )
    except NumericError as exc:
        LOGGER.error("Training aborted: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        LOGGER.error("Invalid configuration: %s", exc)
        return EXIT_INPUT
    try:
        if args.out:
            write_report(report, Path(args.out))
        if args.save_checkpoint and not report.diverged:
            save_parameters(
                model.params,
                Path(args.save_checkpoint),
                {"variant": report.variant, "seed": report.seed, "config_hash": report.config_hash},
            )
    except OSError as exc:
        LOGGER.error("Failed to write output: %s", exc)
        return EXIT_INPUT
    print(
        f"{report.variant}: L_m {report.initial_total:.6f} -> {report.final_total:.6f} "
        f"over {len(report.losses)} steps, toy AP {report.toy_ap:.4f}"
    )
    if report.diverged:
        LOGGER.error("Training diverged at step %s", report.losses[-1].step)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Run the verification suites and print a pass/fail table."""
    results = run_suites(args.suite, jobs=args.jobs)
    print(format_results(results))
    if args.out:
        try:
            _write_json({"suite": args.suite, "cases": [r.as_dict() for r in results]}, args.out)
        except OSError as exc:
            LOGGER.error("Failed to write output: %s", exc)
            return EXIT_INPUT
    return EXIT_OK if all(result.passed for result in results) else EXIT_NUMERIC


def cmd_profiles(args: argparse.Namespace) -> int:
    profiles = list_profiles()
    if args.format == "json":
        _write_json([profile.as_dict() for profile in profiles], "-")
        return EXIT_OK
    for profile in profiles:
        print(f"{profile.name}: {profile.summary}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    """Run the CLI entrypoint and return an exit code."""
    parser = argparse.ArgumentParser(
        prog="reldetr",
        description="Position-relation detection decoder toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase log verbosity (repeatable).",
    )
    parser.add_argument(
        "--quiet",
        action="store_true",
        help="Reduce log output to warnings and errors.",
    )
    parser.add_argument(
        "--log-json",
        action="store_true",
        help="Emit logs as JSON on stderr.",
    )
    parser.add_argument(
        "--log-file",
        help="Optional path for JSON log output.",
    )

    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_mc_parser(subparsers)
    _add_encode_parser(subparsers)
    _add_toy_parser(subparsers)
    _add_verify_parser(subparsers)
    _add_profiles_parser(subparsers)
    _add_version_parser(subparsers)

    argv_list = list(argv) if argv is not None else sys.argv[1:]
    args = parser.parse_args(argv_list)
    log_file_value = getattr(args, "log_file", None)
    configure_logging(
        LogOptions(
            verbose=getattr(args, "verbose", 0) or 0,
            quiet=bool(getattr(args, "quiet", False)),
            log_file=Path(log_file_value) if log_file_value else None,
            json_console=bool(getattr(args, "log_json", False)),
        )
    )

    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "profiles":
        return cmd_profiles(args)
    if args.command == "mc":
        return cmd_mc(args)
    if args.command == "verify":
        return cmd_verify(args)

    try:
        profile = _resolve_profile(args, argv_list)
    except (OSError, ValueError, TypeError) as exc:
        LOGGER.error("Failed to load config: %s", exc)
        return EXIT_INPUT
    if args.command == "encode":
        return cmd_encode(args, profile)
    if args.command == "toy":
        return cmd_toy(args, profile)
    parser.error(f"unknown command {args.command}")
    return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
