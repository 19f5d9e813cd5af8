"""
Command line front end.

Every command is deterministic given its flags. Logs go to standard output; their
level comes from ``-v`` or the ``STACKSENSE_LOG`` environment variable.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from stacksense import __version__
from stacksense.datagen import (
    EmpiricalDistribution,
    GenerationConfig,
    generate_dataset,
    load_distribution,
    read_dataset,
    write_dataset,
)
from stacksense.datagen.rpc import load_rpc_profiles
from stacksense.diagnostics import Messages
from stacksense.encoder import build_nmap_schema
from stacksense.encoder.endpoints import build_rpc_schema, parse_endpoint_listing
from stacksense.exceptions import (
    Diverged,
    ModelFileError,
    SchemaMismatch,
    StackSenseError,
    TrainingError,
)
from stacksense.fpdb import ParsedDB, format_rule, parse_db, parse_response
from stacksense.fpdb.scoring import classic_match
from stacksense.hierarchy import (
    HierarchicalModel,
    HierarchyConfig,
    TopologyConfig,
    classify_endpoints,
    classify_host,
    evaluate,
    reduce_report,
    train_hierarchy,
)
from stacksense.hierarchy.model_file import load_model, save_model
from stacksense.hierarchy.report import reduce_table
from stacksense.labels import load_labels
from stacksense.nn.training import TrainingConfig, TrainingMode


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)30s - %(levelname)8s - %(funcName)20s() - %(message)s"
LOG_ENV = "STACKSENSE_LOG"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SCHEMA = 4
EXIT_MODEL_FILE = 5
EXIT_TRAINING = 6


def setup_logging(verbose: int = 0) -> None:
    if verbose:
        level = logging.DEBUG if verbose > 1 else logging.INFO
    else:
        name = os.environ.get(LOG_ENV, "WARNING").upper()
        level = getattr(logging, name, None)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(stream=sys.stdout, level=level, format=LOG_FORMAT)


def _read(filepath: str) -> str:
    return Path(filepath).read_text(encoding="utf-8")


def _messages(args: argparse.Namespace) -> Messages:
    ignore = {c.strip() for c in args.ignore.split(",") if c.strip()} if args.ignore else None
    return Messages(ignore)


def _emit(args: argparse.Namespace, text: str, structured: Any) -> None:
    if args.format == "structured":
        print(json.dumps(structured, indent=4, sort_keys=True))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _model_header(filepath: str, model: HierarchicalModel) -> Tuple[str, Dict[str, Any]]:
    seed = model.settings.get("generation", {}).get("seed")
    header = f"model {filepath} (schema {model.schema_version}, seed {_seed_text(seed)})"
    return header, {"model": filepath, "schema": model.schema_version, "seed": seed}


def _seed_text(seed: Optional[int]) -> str:
    # hand built models and the classic scorer draw nothing
    return "none" if seed is None else str(seed)


def _load_db(filepath: str, messages: Messages) -> ParsedDB:
    db = parse_db(_read(filepath), messages)
    for m in messages:
        logger.warning("%s:%s", filepath, m.to_text())
    return db


def cmd_parse_db(args: argparse.Namespace) -> int:
    messages = _messages(args)
    db = parse_db(_read(args.db), messages)
    families = db.families()
    summary = f"{len(db.rules)} rules, {len(families)} families\n"
    summary += "".join(f"  {name}: {count}\n" for name, count in sorted(families.items()))
    if messages:
        summary += messages.to_text(args.db)
    if args.canonical:
        summary += "".join(f"\n{format_rule(r)}" for r in db.rules)
    _emit(
        args,
        summary,
        {
            "rules": len(db.rules),
            "families": families,
            "messages": messages.serialize(),
        },
    )
    return EXIT_OK if db.rules else EXIT_INPUT


def _distribution(args: argparse.Namespace, messages: Messages) -> EmpiricalDistribution:
    return load_distribution(args.dist, messages)


def cmd_gen(args: argparse.Namespace) -> int:
    messages = _messages(args)
    db = _load_db(args.db, messages)
    dist = _distribution(args, messages)
    schema = build_nmap_schema(db.rules, messages=messages)
    labels = load_labels(args.labels)
    ds = generate_dataset(db.rules, dist, schema, labels, args.n, args.seed, messages)
    write_dataset(ds, args.out)
    text = f"wrote {len(ds)} patterns to {args.out} (schema {schema.version}, seed {args.seed})\n"
    if messages:
        text += messages.to_text()
    _emit(
        args,
        text,
        {
            "out": args.out,
            "patterns": len(ds),
            "schema": schema.version,
            "seed": args.seed,
            "messages": messages.serialize(),
        },
    )
    return EXIT_OK


def _hidden_overrides(items: Optional[List[str]]) -> Dict[str, int]:
    out = {}
    for item in items or []:
        name, sep, size = item.rpartition("=")
        if not sep:
            raise ValueError(f"expected NET=SIZE, got '{item}'")
        out[name] = int(size)
    return out


def cmd_train(args: argparse.Namespace) -> int:
    messages = _messages(args)
    labels = load_labels(args.labels)
    schema = build_nmap_schema()
    if args.data:
        dataset = read_dataset(args.data)
        rules = _load_db(args.db, messages).rules if args.db else []
        dist = EmpiricalDistribution.uniform()
    elif args.db:
        dataset = None
        rules = _load_db(args.db, messages).rules
        dist = _distribution(args, messages)
    else:
        raise ValueError("train needs --db or --data")

    generation = GenerationConfig(
        size=args.n,
        version_size=args.version_n,
        rpc_size=args.rpc_n,
        train_fraction=args.train_fraction,
        seed=args.seed,
    )
    training = TrainingConfig(
        rate=args.rate,
        momentum=args.momentum,
        adaptive=args.adaptive,
        error_threshold=args.error_threshold,
        max_generations=args.max_generations,
        mode=TrainingMode(args.mode),
        seed=args.seed,
    )
    base = TopologyConfig.reference() if args.reference_topology else TopologyConfig()
    hidden = dict(base.hidden)
    hidden.update(_hidden_overrides(args.hidden))
    topology = TopologyConfig(args.hidden_fraction, base.min_hidden, hidden)
    config = HierarchyConfig(relevance_threshold=args.threshold, retain=args.retain)
    rpc = (load_rpc_profiles(args.rpc_profiles), build_rpc_schema()) if args.rpc else None

    result = train_hierarchy(
        rules,
        dist,
        schema,
        labels,
        generation,
        training,
        topology,
        config,
        rpc=rpc,
        dataset=dataset,
        messages=messages,
    )
    save_model(result.model, args.out)
    scores = evaluate(result.model, result.dataset, result.held_out)
    lines = [f"model {args.out} (schema {schema.version}, seed {args.seed})"]
    for name, trace in result.traces.items():
        lines.append(
            f"  {name}: {trace.generations} generations, error {trace.final_error:.6g}, "
            f"converged={trace.converged}"
        )
    lines.append(f"  held-out relevance accuracy: {scores.relevance}")
    lines.append(f"  held-out family accuracy: {scores.family}")
    _emit(
        args,
        "\n".join(lines),
        {
            "model": args.out,
            "schema": schema.version,
            "seed": args.seed,
            "traces": {k: v.serialize() for k, v in result.traces.items()},
            "held_out": scores.serialize(),
        },
    )
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    messages = _messages(args)
    model = load_model(args.model)
    resp = parse_response(_read(args.response), messages)
    report = classify_host(model, resp, messages=messages)
    header, about = _model_header(args.model, model)
    text = f"{header}\n\n{report.to_text()}"
    if messages:
        text += messages.to_text(args.response)
    _emit(args, text, {**about, **report.serialize(), "messages": messages.serialize()})
    return EXIT_OK


def cmd_classify_endpoints(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    report = classify_endpoints(model, parse_endpoint_listing(_read(args.endpoints)))
    header, about = _model_header(args.model, model)
    _emit(args, f"{header}\n\n{report.to_text()}", {**about, **report.serialize()})
    return EXIT_OK


def cmd_score_classic(args: argparse.Namespace) -> int:
    messages = _messages(args)
    db = _load_db(args.db, messages)
    resp = parse_response(_read(args.response), messages)
    ranked = classic_match(resp, db.rules)[: args.top]
    lines = [f"db {args.db} ({len(db.rules)} rules, seed {_seed_text(None)})"]
    lines.extend(f"{s.score:.4f} {s.matched}/{s.considered} {r.name}" for r, s in ranked)
    _emit(
        args,
        "\n".join(lines),
        {
            "db": args.db,
            "seed": None,
            "ranked": [{"name": r.name, **s.serialize()} for r, s in ranked],
        },
    )
    return EXIT_OK


def cmd_reduce_report(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    rows = reduce_report(model, args.net)
    _emit(args, reduce_table(rows), [r._asdict() for r in rows])
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--format",
        choices=("text", "structured"),
        default="text",
        help="output format (default: %(default)s)",
    )
    p.add_argument(
        "--ignore",
        default="",
        help="comma separated diagnostic codes to ignore, i.e., W203,W204 (default: none)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stacksense",
        description="OS identification from stack fingerprints with layered neural nets",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="log more, repeat for debug"
    )
    sub = parser.add_subparsers(dest="command")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("parse-db", help="check a fingerprint database", formatter_class=fmt)
    p.add_argument("--db", required=True, help="fingerprint database")
    p.add_argument("--canonical", action="store_true", help="print the rules in canonical form")
    _add_common(p)
    p.set_defaults(func=cmd_parse_db)

    p = sub.add_parser("gen", help="generate a labeled data set", formatter_class=fmt)
    p.add_argument("--db", required=True, help="fingerprint database")
    p.add_argument("--dist", default=None, help="distribution file, the shipped one if unset")
    p.add_argument("--labels", default=None, help="label map, the shipped one if unset")
    p.add_argument("--n", type=int, default=5000, help="number of patterns")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.add_argument("--out", required=True, help="output data set")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the hierarchy", formatter_class=fmt)
    p.add_argument("--db", default=None, help="fingerprint database")
    p.add_argument("--data", default=None, help="data set written by gen, replaces --dist")
    p.add_argument("--dist", default=None, help="distribution file, the shipped one if unset")
    p.add_argument("--labels", default=None, help="label map, the shipped one if unset")
    p.add_argument("--n", type=int, default=5000, help="patterns of the shared data set")
    p.add_argument("--version-n", type=int, default=0, help="patterns per version net, --n if 0")
    p.add_argument("--rpc-n", type=int, default=2000, help="patterns of the endpoint net")
    p.add_argument("--train-fraction", type=float, default=0.8, help="share used for fitting")
    p.add_argument("--seed", type=int, default=0, help="seed of every random choice")
    p.add_argument("--retain", type=float, default=0.98, help="variance fraction kept")
    p.add_argument("--threshold", type=float, default=0.0, help="relevance gate")
    p.add_argument("--rate", type=float, default=0.5, help="learning rate")
    p.add_argument("--momentum", type=float, default=0.5, help="momentum")
    p.add_argument("--adaptive", action="store_true", help="bold driver learning rate")
    p.add_argument("--mode", choices=("batch", "sequential"), default="batch", help="updates")
    p.add_argument("--error-threshold", type=float, default=1e-3, help="stop below this error")
    p.add_argument("--max-generations", type=int, default=1000, help="generation cap")
    p.add_argument("--hidden-fraction", type=float, default=0.3, help="hidden / reduced input")
    p.add_argument(
        "--hidden", action="append", default=None, help="NET=SIZE hidden override, repeatable"
    )
    p.add_argument(
        "--reference-topology", action="store_true", help="hidden sizes of the original nets"
    )
    p.add_argument("--rpc", action="store_true", help="also train the endpoint net")
    p.add_argument("--rpc-profiles", default=None, help="rpc profiles, the shipped ones if unset")
    p.add_argument("--out", required=True, help="output model file")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify a host response", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--response", required=True, help="host response")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser(
        "classify-endpoints", help="classify a DCE-RPC endpoint listing", formatter_class=fmt
    )
    p.add_argument("--model", required=True, help="model file with an endpoint net")
    p.add_argument("--endpoints", required=True, help="endpoint mapper listing")
    _add_common(p)
    p.set_defaults(func=cmd_classify_endpoints)

    p = sub.add_parser("score-classic", help="best fit scores", formatter_class=fmt)
    p.add_argument("--db", required=True, help="fingerprint database")
    p.add_argument("--response", required=True, help="host response")
    p.add_argument("--top", type=int, default=10, help="rules to print")
    _add_common(p)
    p.set_defaults(func=cmd_score_classic)

    p = sub.add_parser("reduce-report", help="input fields a net keeps", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--net", default="family", help="relevance, family or version:<family>")
    _add_common(p)
    p.set_defaults(func=cmd_reduce_report)
    return parser


def _exit_code(e: BaseException) -> int:
    if isinstance(e, SchemaMismatch):
        return EXIT_SCHEMA
    if isinstance(e, ModelFileError):
        return EXIT_MODEL_FILE
    if isinstance(e, (TrainingError, Diverged)):
        return EXIT_TRAINING
    if isinstance(e, (StackSenseError, ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_UNEXPECTED


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except Exception as e:
        code = _exit_code(e)
        if code == EXIT_UNEXPECTED:
            logger.exception("unexpected error")
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
