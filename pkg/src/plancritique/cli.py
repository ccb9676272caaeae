"""Command-line entry point: gen, validate, prompt, run, report.

Exit codes: 0 success (for ``validate``: plan valid), 1 plan invalid,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from . import __version__
from .agents import (
    ChatClient,
    LlmVerifier,
    NoisyVerifier,
    SoundVerifier,
    scripted_agent,
)
from .blocksworld import builtin_domain, domain_text, generate_suite
from .config import ConfigError, RunConfig, load_config
from .orchestrator import (
    AgentFactory,
    ExperimentMode,
    RunConflict,
    TranscriptStore,
    choose_example,
    run_suite,
)
from .pddl import (
    Domain,
    PDDLError,
    Problem,
    parse_domain,
    parse_plan,
    parse_problem,
    print_problem,
)
from .promptgen import Templates, generation_prompt, verification_prompt
from .reporting import render_report, summarize
from .validator import FeedbackLevel, check, feedback_to_text

log = logging.getLogger("plancritique")

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2

SUITE_MANIFEST = "suite.json"


class CliError(Exception):
    pass


def _write_if_new(path: Path, content: str, force: bool) -> None:
    """Write ``content`` unless an identical file is already there; refuse to clobber without force."""
    if path.exists():
        if path.read_text(encoding="utf-8") == content:
            return
        if not force:
            raise CliError(f"{path} exists with different content (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


# ---------------------------------------------------------------------------
# Suites on disk


def write_suite(out_dir: Path, count: int, n_blocks: int, seed: int, force: bool = False) -> dict:
    suite = generate_suite(count, n_blocks, seed)
    dtext = domain_text()
    files = {"domain.pddl": dtext}
    entries = []
    for spec, problem in suite:
        text = print_problem(problem)
        name = f"{spec.id}.pddl"
        files[name] = text
        entries.append(
            {"id": spec.id, "seed": spec.seed, "file": name, "sha256": hashlib.sha256(text.encode()).hexdigest()}
        )
    manifest = {
        "count": count,
        "n_blocks": n_blocks,
        "master_seed": seed,
        "domain": "domain.pddl",
        "instances": entries,
    }
    files[SUITE_MANIFEST] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    if not force:
        for name, content in files.items():
            p = out_dir / name
            if p.exists() and p.read_text(encoding="utf-8") != content:
                raise CliError(f"{p} exists with different content (use --force to overwrite)")
    for name, content in files.items():
        _write_if_new(out_dir / name, content, force=True)
    return manifest


def load_suite(suite_dir: Path) -> tuple[Domain, list[Problem]]:
    manifest_path = suite_dir / SUITE_MANIFEST
    if not manifest_path.exists():
        raise CliError(f"{suite_dir} has no {SUITE_MANIFEST}; create it with `plancritique gen`")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    domain = parse_domain((suite_dir / manifest["domain"]).read_text(encoding="utf-8"))
    problems = []
    for entry in manifest["instances"]:
        text = (suite_dir / entry["file"]).read_text(encoding="utf-8")
        if hashlib.sha256(text.encode()).hexdigest() != entry["sha256"]:
            raise CliError(f"{entry['file']} does not match its checksum in {SUITE_MANIFEST}")
        problems.append(parse_problem(text, domain))
    return domain, problems


def _suite_for(cfg: RunConfig) -> tuple[Domain, list[Problem]]:
    if cfg.suite.dir is not None:
        return load_suite(cfg.resolve(cfg.suite.dir))
    suite = generate_suite(cfg.suite.count, cfg.suite.n_blocks, cfg.suite.master_seed)
    return builtin_domain(), [p for _, p in suite]


def _agents_for(cfg: RunConfig, templates: Templates) -> AgentFactory:
    g = cfg.generator
    if g.kind == "llm":
        gen_factory = lambda iid: ChatClient(g.endpoint)
    else:
        gen_path = cfg.resolve(g.script)
        gen_factory = lambda iid: scripted_agent(gen_path, iid, strict=g.strict)

    v = cfg.verifier
    if v.kind == "none":
        ver_factory = lambda iid: None
    elif v.kind == "sound":
        ver_factory = lambda iid: SoundVerifier()
    elif v.kind == "noisy":
        ver_factory = lambda iid: NoisyVerifier(v.noisy, stream=iid)
    elif v.kind == "llm":
        ver_factory = lambda iid: LlmVerifier(ChatClient(v.endpoint), templates)
    else:
        ver_path = cfg.resolve(v.script)
        ver_factory = lambda iid: LlmVerifier(scripted_agent(ver_path, iid, strict=v.strict), templates)
    return AgentFactory(gen_factory, ver_factory)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    if args.count < 1:
        raise CliError("--count must be at least 1")
    manifest = write_suite(Path(args.out), args.count, args.blocks, args.seed, force=args.force)
    print(f"wrote {len(manifest['instances'])} instances to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        domain = parse_domain(Path(args.domain).read_text(encoding="utf-8"))
        problem = parse_problem(Path(args.problem).read_text(encoding="utf-8"), domain)
        plan = parse_plan(Path(args.plan).read_text(encoding="utf-8"), domain, problem)
    except (OSError, PDDLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    level = FeedbackLevel.parse(args.level)
    result, feedback = check(domain, problem, plan, level)
    text = feedback_to_text(feedback, domain)
    if args.json:
        record = {
            "valid": result.valid,
            "executable": result.executable,
            "first_error_index": result.first_error_index,
            "unmet_goals": [str(a) for a in sorted(result.unmet_goals)],
            "trace": [
                {
                    "index": r.index,
                    "action": str(r.action),
                    "applicable": r.applicable,
                    "unmet_preconditions": [str(a) for a in sorted(r.unmet_preconditions)],
                }
                for r in result.trace
            ],
            "feedback_level": level.value,
            "feedback": text,
        }
        print(json.dumps(record, indent=2))
    else:
        print(text)
    return EXIT_OK if result.valid else EXIT_INVALID


def cmd_prompt(args) -> int:
    domain, problems = load_suite(Path(args.suite))
    by_id = {p.name: i for i, p in enumerate(problems)}
    if args.instance not in by_id:
        raise CliError(f"no instance '{args.instance}' in {args.suite}")
    index = by_id[args.instance]
    problem = problems[index]
    templates = Templates(args.template_dir)
    if args.kind == "generation":
        bundle = generation_prompt(domain, choose_example(domain, problems, index, args.seed), problem, templates)
    else:
        if not args.plan:
            raise CliError("--plan is required for verification prompts")
        plan = parse_plan(Path(args.plan).read_text(encoding="utf-8"), domain, problem)
        bundle = verification_prompt(domain, problem, plan, templates)
    if args.out:
        out = Path(args.out)
        _write_if_new(out / f"{problem.name}.{args.kind}.system.txt", bundle.system_text, args.force)
        _write_if_new(out / f"{problem.name}.{args.kind}.user.txt", bundle.user_text, args.force)
        print(f"wrote prompt files to {out}")
    else:
        print(bundle.system_text.rstrip("\n"))
        print()
        print(bundle.user_text.rstrip("\n"))
    return EXIT_OK


def execute_run(cfg: RunConfig, parallelism: int | None = None, force: bool = False) -> Path:
    """Run the configured experiment and write transcripts, manifest and report. Returns the output dir."""
    cfg.check_credentials()
    templates = Templates(cfg.resolve(cfg.template_dir))
    domain, problems = _suite_for(cfg)
    out = cfg.resolve(cfg.output_dir)
    store = TranscriptStore(out)
    transcripts = run_suite(
        cfg.loop,
        domain,
        problems,
        _agents_for(cfg, templates),
        parallelism=parallelism or cfg.parallelism,
        store=store,
        templates=templates,
        clock=time.perf_counter if cfg.record_timing else None,
        force=force,
        run_identity={"agents": {"generator": cfg.generator.to_dict(), "verifier": cfg.verifier.to_dict()}},
    )
    _write_if_new(out / "config.yaml", cfg.dump(), force)
    summary = summarize(transcripts)
    ext = "md" if cfg.report_format == "markdown" else "csv"
    meta = {"experiment_id": cfg.experiment_id(), "template_version": templates.version}
    report = render_report([summary], format=cfg.report_format, meta=meta)
    _write_if_new(out / f"report-{cfg.experiment_id()}.{ext}", report, force)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=str(Path(args.output_dir).resolve()))
    out = execute_run(cfg, parallelism=args.parallelism, force=args.force)
    print(f"run complete: {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.transcript_dir)
    files = sorted(root.rglob(TranscriptStore.TRANSCRIPTS)) if root.is_dir() else []
    groups: dict = {}
    versions = set()
    for f in files:
        store = TranscriptStore(f.parent)
        if store.manifest_path.exists():
            identity = json.loads(store.manifest_path.read_text(encoding="utf-8")).get("identity", {})
            versions.add(str(identity.get("template_version", "unknown")))
        for t in store.load():
            groups.setdefault((t.config.mode.value, t.config.feedback_level.value), []).append(t)
    if not groups:
        raise CliError(f"no transcripts found under {root}")
    mode_order = [m.value for m in ExperimentMode]
    level_order = [lv.value for lv in FeedbackLevel]
    keys = sorted(groups, key=lambda k: (mode_order.index(k[0]), level_order.index(k[1])))
    meta = {"template_version": ", ".join(sorted(versions))} if versions else None
    report = render_report([summarize(groups[k]) for k in keys], format=args.format, meta=meta)
    if args.out:
        _write_if_new(Path(args.out), report, args.force)
    else:
        sys.stdout.write(report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plancritique", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random Blocksworld suite")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="validate a plan and print feedback")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.add_argument("--level", default="first_error", help="none, binary, first_error or open_conditions")
    p.add_argument("--json", action="store_true", help="print the full validation record as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("prompt", help="render a prompt for inspection")
    p.add_argument("--suite", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--kind", choices=("generation", "verification"), default="generation")
    p.add_argument("--plan", help="plan file (verification prompts)")
    p.add_argument("--seed", type=int, default=0, help="seed for choosing the one-shot example")
    p.add_argument("--template-dir")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--force", action="store_true", help="discard output from a differently configured run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize transcripts")
    p.add_argument("transcript_dir")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ConfigError, RunConflict, PDDLError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
