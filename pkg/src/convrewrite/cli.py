"""Command-line interface.

Exit codes: 0 success, 1 configuration or dataset validation error,
2 provider error, 3 bad input.

Config discovery (provider config and template manifest): explicit flag,
then environment variable, then ``~/.config/convrewrite/``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from .core import PRESETS, ConversationSession, RewriteConfig
from .datasets import (
    DEFAULT_VIS_VOCABULARY,
    SyntheticProfile,
    TaskType,
    compute_stats,
    dataset_lines,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .engine import advance_session, rewrite
from .errors import (
    ConvRewriteError,
    EmptyQuery,
    ParseError,
    ProviderError,
    UnknownTemplate,
    ValidationError,
)
from .evaluation import load_score_fixture, render_gains, render_table, run_eval
from .fixtures import TASK_LABELS
from .gate import HeuristicGate
from .prompts import TemplateRegistry, builtin_templates
from .providers import HashEmbedder, HttpProvider, HttpProviderConfig, IdentityMock, RuleFusionMock, ScriptedMock

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PROVIDER = 2
EXIT_INPUT = 3

PROVIDER_ENV = "CONVREWRITE_PROVIDER_CONFIG"
TEMPLATES_ENV = "CONVREWRITE_TEMPLATES"
USER_CONFIG_DIR = Path("~/.config/convrewrite")

log = logging.getLogger("convrewrite")

TEMPLATE_FOR_TASK = {TaskType.TEXT_QA: "text-qa", TaskType.TEXT_TO_VIS: "text-to-vis"}


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _discover(flag: Optional[str], env: str, default_name: str) -> Optional[Path]:
    if flag:
        path = Path(flag).expanduser()
        if not path.exists():
            raise CliError(f"config file not found: {path}", EXIT_CONFIG)
        return path
    if os.environ.get(env):
        path = Path(os.environ[env]).expanduser()
        if not path.exists():
            raise CliError(f"{env} points to a missing file: {path}", EXIT_CONFIG)
        return path
    path = (USER_CONFIG_DIR / default_name).expanduser()
    return path if path.exists() else None


def _templates(args) -> TemplateRegistry:
    path = _discover(args.templates, TEMPLATES_ENV, "templates/manifest.json")
    if path is None:
        return builtin_templates()
    try:
        return TemplateRegistry.from_manifest(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load template manifest {path}: {exc}", EXIT_CONFIG) from None


def _model(args):
    if args.mock == "identity":
        return IdentityMock()
    if args.mock == "rule":
        return RuleFusionMock()
    if args.mock == "scripted":
        if not args.script:
            raise CliError("--mock scripted needs --script FILE", EXIT_CONFIG)
        try:
            entries = json.loads(Path(args.script).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read script {args.script}: {exc}", EXIT_CONFIG) from None
        return ScriptedMock([(m, r) for m, r in entries], strict=True)
    path = _discover(args.provider_config, PROVIDER_ENV, "provider.json")
    if path is None:
        raise CliError(
            "no model provider configured: pass --mock, --provider-config FILE, "
            f"or set {PROVIDER_ENV}",
            EXIT_CONFIG,
        )
    try:
        return HttpProvider(HttpProviderConfig.load(path))
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"invalid provider config {path}: {exc}", EXIT_CONFIG) from None


def _config(args, templates: TemplateRegistry) -> RewriteConfig:
    approach = args.approach
    template_id = args.template
    if approach is None:
        task = templates[template_id].metadata.get("task") if template_id in templates else None
        approach = "rewrite" if task == TaskType.TEXT_QA.value else "fusion"
    config = PRESETS[approach]
    changes = {"gate_enabled": bool(args.gate)}
    if template_id:
        changes["prompt_template_id"] = template_id
    if args.k is not None:
        changes["k"] = args.k
    try:
        config = config.replace(**changes)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if config.prompt_template_id not in templates:
        raise CliError(f"unknown prompt template {config.prompt_template_id!r}", EXIT_CONFIG)
    return config


def _load_session(path: Optional[str]) -> ConversationSession:
    if not path:
        return ConversationSession()
    try:
        return ConversationSession.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read history file: {exc}", EXIT_INPUT) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"invalid history file {path}: {exc}", EXIT_INPUT) from None


def _describe_outcome(outcome, out: TextIO) -> None:
    ctx = outcome.context_used
    print(f"approach: {outcome.config_used.approach_id}", file=out)
    print(f"context items: {len(ctx.items)}", file=out)
    for idx, item in zip(ctx.source_indices, ctx.items):
        print(f"  turn {idx}: {item.query}", file=out)
        if item.response is not None:
            print(f"    response: {item.response}", file=out)
    if outcome.gate_decision is not None:
        d = outcome.gate_decision
        print(f"gate: {d.rationale_tag.value} (needs_rewrite={d.needs_rewrite}, confidence={d.confidence:.2f})", file=out)
    print(f"gated: {'yes' if outcome.was_gated else 'no'}", file=out)


# ---------------------------------------------------------------------------
# commands

def cmd_rewrite(args) -> int:
    if not args.query or not args.query.strip():
        raise CliError("empty query: pass a non-empty --query", EXIT_INPUT)
    templates = _templates(args)
    config = _config(args, templates)
    model = _model(args)
    session = _load_session(args.history)
    outcome = rewrite(session, args.query, config, model, HeuristicGate(), templates)
    print(outcome.rewritten_query)
    if args.verbose:
        _describe_outcome(outcome, sys.stderr)
    return EXIT_OK


def cmd_chat(args) -> int:
    templates = _templates(args)
    config = _config(args, templates)
    model = _model(args)
    session = _load_session(args.history)
    gate = HeuristicGate()
    interactive = sys.stdin.isatty()

    def prompt() -> None:
        if interactive:
            sys.stderr.write("> ")
            sys.stderr.flush()

    prompt()
    for line in sys.stdin:
        query = line.rstrip("\r\n")
        if not query.strip():
            prompt()
            continue
        command = query.strip()
        if command in ("/quit", "/exit"):
            break
        if command == "/reset":
            session = session.reset()
            print("(session reset)", file=sys.stderr)
            prompt()
            continue
        try:
            session, outcome = advance_session(session, query, None, config, model, gate, templates)
        except ProviderError as exc:
            print(f"error: {exc}", file=sys.stderr)
        else:
            print(outcome.rewritten_query, flush=True)
            if args.verbose:
                _describe_outcome(outcome, sys.stderr)
        prompt()
    if args.save:
        Path(args.save).write_text(session.to_json(indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


_APPROACH_NAMES = {"fusion", "rewrite", "fusion+gate", "rewrite+gate"}


def _eval_configs(names: Sequence[str], task: TaskType, k: Optional[int]) -> dict[str, RewriteConfig]:
    configs = {}
    for name in names:
        if name not in _APPROACH_NAMES:
            raise CliError(f"unknown approach {name!r}; choose from {sorted(_APPROACH_NAMES)}", EXIT_INPUT)
        base, _, gate = name.partition("+")
        cfg = PRESETS[base].replace(prompt_template_id=TEMPLATE_FOR_TASK[task], gate_enabled=bool(gate))
        if k is not None:
            cfg = cfg.replace(k=k)
        configs[f"query_{base}" + ("+gate" if gate else "")] = cfg
    return configs


def cmd_eval(args) -> int:
    reports = []
    if args.scores:
        for path in args.scores:
            try:
                stem = Path(path).stem.removeprefix("scores_")
                reports.append(load_score_fixture(path, task_label=TASK_LABELS.get(stem, stem)))
            except (OSError, ValueError) as exc:
                raise CliError(f"cannot load score fixture {path}: {exc}", EXIT_CONFIG) from None
    if args.dataset:
        templates = _templates(args)
        model = _model(args)
        embedder = HashEmbedder(args.embed_dim)
        names = [n.strip() for n in args.approaches.split(",") if n.strip()]
        for path in args.dataset:
            try:
                dataset = load_dataset(path)
            except (ValidationError, ParseError) as exc:
                print(f"dataset validation failed: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            except OSError as exc:
                raise CliError(f"cannot read dataset: {exc}", EXIT_CONFIG) from None
            configs = _eval_configs(names, dataset.task_type, args.k)
            report = run_eval(dataset, configs, model, embedder, HeuristicGate(), templates=templates, jobs=args.jobs)
            if report.failures:
                print(f"warning: {len(report.failures)} conversation(s) failed in {dataset.dataset_id}", file=sys.stderr)
                for f in report.failures:
                    print(f"  {f.approach_id} {f.conversation_id}: {f.error}", file=sys.stderr)
            reports.append(report)
    if not reports:
        raise CliError("nothing to evaluate: pass --dataset or --scores", EXIT_INPUT)

    print(render_table(reports, history_only=args.history_only))
    if args.verbose:
        for rep in reports:
            print()
            print(f"[{rep.task_label or rep.dataset_id}] relative gains")
            print(render_gains(rep))
    if args.report:
        doc = {"reports": [r.to_dict() for r in reports]}
        Path(args.report).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_dataset(args) -> int:
    if args.dataset_command == "generate":
        lengths = None
        if args.length is not None:
            lengths = tuple([args.length] * args.conversations)
            length_range = (args.length, args.length)
        else:
            length_range = (args.min_length, args.max_length)
        try:
            profile = SyntheticProfile(
                task_type=TaskType(args.task),
                n_conversations=args.conversations,
                length_range=length_range,
                seed=args.seed,
                lengths=lengths,
                topic_switch_prob=args.topic_switch,
                dataset_id=args.dataset_id,
                edit_vocabulary=DEFAULT_VIS_VOCABULARY,
            )
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
        dataset = generate_synthetic(profile)
        if args.out:
            mpath = save_dataset(dataset, args.out)
            print(f"wrote {args.out} ({compute_stats(dataset).n_questions} questions) and {mpath}")
        else:
            for line in dataset_lines(dataset):
                print(line)
        return EXIT_OK

    try:
        dataset = load_dataset(args.path)
    except (ValidationError, ParseError) as exc:
        print(f"{args.path}: invalid", file=sys.stderr)
        for loc, msg in getattr(exc, "issues", [(str(args.path), str(exc))]):
            print(f"  {loc}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dataset_command == "validate":
        stats = compute_stats(dataset)
        print(f"{args.path}: ok ({stats.n_conversations} conversations, {stats.n_questions} questions)")
        return EXIT_OK
    stats = compute_stats(dataset)
    if args.json:
        print(json.dumps(stats.to_dict()))
    else:
        print(stats.format_table(dataset.dataset_id))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mock", choices=["identity", "rule", "scripted"], help="use an offline mock model")
    p.add_argument("--script", help="JSON list of [matcher, response] pairs for --mock scripted")
    p.add_argument("--provider-config", help=f"HTTP provider config (else ${PROVIDER_ENV})")
    p.add_argument("--templates", help=f"prompt template manifest (else ${TEMPLATES_ENV}, then built-ins)")


def _add_approach_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--approach", choices=sorted(PRESETS), help="preset (default follows the template's task)")
    p.add_argument("--template", help="prompt template id")
    p.add_argument("--k", type=int, help="override the history window length")
    p.add_argument("--gate", action="store_true", help="skip self-contained queries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convrewrite", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rewrite", help="rewrite one query")
    _add_approach_options(p)
    _add_model_options(p)
    p.add_argument("--history", help="session JSON with the prior turns")
    p.add_argument("--query", required=True)
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("chat", help="interactive session, one query per line")
    _add_approach_options(p)
    _add_model_options(p)
    p.add_argument("--history", help="resume from a saved session")
    p.add_argument("--save", help="write the session JSON here on exit")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("eval", help="score approaches on datasets or aggregate score fixtures")
    _add_model_options(p)
    p.add_argument("--dataset", action="append", help="dataset .jsonl or manifest (repeatable)")
    p.add_argument("--scores", action="append", help="per-question score fixture (repeatable)")
    p.add_argument("--approaches", default="fusion,rewrite", help="comma list of fusion, rewrite, rewrite+gate, fusion+gate")
    p.add_argument("--k", type=int)
    p.add_argument("--report", help="write the machine-readable report here")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--embed-dim", type=int, default=256)
    p.add_argument("--history-only", action="store_true", help="aggregate only questions with chat history")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dataset", help="validate, summarise or generate datasets")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    for name in ("validate", "stats"):
        q = dsub.add_parser(name)
        q.add_argument("path")
        if name == "stats":
            q.add_argument("--json", action="store_true")
        q.set_defaults(func=cmd_dataset)
    q = dsub.add_parser("generate")
    q.add_argument("--task", choices=[t.value for t in TaskType], default=TaskType.TEXT_TO_VIS.value)
    q.add_argument("--conversations", type=int, default=20)
    q.add_argument("--length", type=int, help="fixed chat length")
    q.add_argument("--min-length", type=int, default=2)
    q.add_argument("--max-length", type=int, default=5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--topic-switch", type=float, default=0.0)
    q.add_argument("--dataset-id")
    q.add_argument("--out", help="output .jsonl (a manifest is written next to it)")
    q.set_defaults(func=cmd_dataset)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (EmptyQuery, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except UnknownTemplate as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvRewriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
