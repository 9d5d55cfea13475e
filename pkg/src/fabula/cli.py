"""Operator command line.

Subcommands: ``init`` (build a snapshot from a world spec), ``run`` (step a
snapshot through N ticks), ``serve`` (HTTP service), ``dialogue`` (terminal
conversation with an agent) and ``analyze`` (post-hoc corpus analysis).
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from fabula.analyzer import analyze_run, render_report, write_analysis
from fabula.engine import init_world
from fabula.narrator import Narrator
from fabula.narrator.live import LiveNarrator
from fabula.narrator.scripted import ScriptedNarrator, default_ruleset, load_rules
from fabula.persistence import LOG_FILENAME, SNAPSHOT_FILENAME, load_snapshot, save_snapshot
from fabula.runner import SimulationRunner
from fabula.worldseed import InitSpec, default_init_spec

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="fabula", description="generative-agent narrative sandbox")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_init = sub.add_parser("init", help="create a world snapshot from a spec")
    p_init.add_argument("--spec", type=Path, default=None, help="world spec JSON (default: built-in world)")
    p_init.add_argument("--seed", type=int, default=0)
    p_init.add_argument("--out", type=Path, required=True, help="snapshot path to write")

    p_run = sub.add_parser("run", help="step a snapshot through simulation ticks")
    p_run.add_argument("--snapshot", type=Path, required=True)
    p_run.add_argument("--ticks", type=int, required=True)
    p_run.add_argument("--pace-ms", type=int, default=None, help="sleep between ticks (1800000 = half-hour pacing)")
    p_run.add_argument("--narrator", choices=("live", "scripted"), default="scripted")
    p_run.add_argument("--script", type=Path, default=None, help="scripted rule file (default: packaged rules)")
    p_run.add_argument("--out", type=Path, default=Path("run"), help="run directory for logs and datasets")

    p_serve = sub.add_parser("serve", help="serve the simulation over HTTP")
    p_serve.add_argument("--snapshot", type=Path, required=True)
    p_serve.add_argument("--bind", default="127.0.0.1:8000")
    p_serve.add_argument("--narrator", choices=("live", "scripted"), default="scripted")
    p_serve.add_argument("--script", type=Path, default=None)
    p_serve.add_argument("--out", type=Path, default=Path("run"))
    p_serve.add_argument("--ui-dir", type=Path, default=None, help="static web UI directory to mount at /ui")

    p_dialogue = sub.add_parser("dialogue", help="talk to an agent in the terminal")
    p_dialogue.add_argument("--snapshot", type=Path, required=True)
    p_dialogue.add_argument("--agent", required=True)
    p_dialogue.add_argument("--human", default=None, help="display label for the human side")
    p_dialogue.add_argument("--narrator", choices=("live", "scripted"), default="scripted")
    p_dialogue.add_argument("--script", type=Path, default=None)
    p_dialogue.add_argument("--save", type=Path, default=None, help="write the updated world back to this snapshot")

    p_analyze = sub.add_parser("analyze", help="analyse a completed run directory")
    p_analyze.add_argument("--dir", type=Path, required=True)
    p_analyze.add_argument("--phrase", action="append", default=[], help="phrase to count (repeatable)")

    return parser


def _make_narrator(kind: str, script: Path | None) -> Narrator:
    if kind == "live":
        return LiveNarrator.from_env()
    ruleset = load_rules(script) if script is not None else default_ruleset()
    return ScriptedNarrator(ruleset)


def _cmd_init(args) -> int:
    spec = InitSpec.from_file(args.spec) if args.spec is not None else default_init_spec()
    world = init_world(spec, args.seed)
    save_snapshot(world, args.out)
    print(f"world '{world.name}' written to {args.out}")
    return 0


def _cmd_run(args) -> int:
    narrator = _make_narrator(args.narrator, args.script)
    runner = SimulationRunner.from_snapshot(
        args.snapshot,
        narrator,
        run_dir=args.out,
        deterministic_time=args.narrator == "scripted",
    )
    reports = runner.step(args.ticks, pace_ms=args.pace_ms)
    runner.finalize()
    shifts = sum(1 for r in reports if r.shift is not None)
    print(f"ran {len(reports)} ticks ({shifts} narrative shifts); artifacts in {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from fabula.service import create_app

    narrator = _make_narrator(args.narrator, args.script)
    runner = SimulationRunner.from_snapshot(args.snapshot, narrator, run_dir=args.out)
    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = Path("frontend/dist")
    app = create_app(runner, ui_dir=ui_dir)
    host, _, port = args.bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _cmd_dialogue(args) -> int:
    narrator = _make_narrator(args.narrator, args.script)
    runner = SimulationRunner.from_snapshot(args.snapshot, narrator)
    session = runner.open_dialogue(args.agent, human_label=args.human)
    print(f"Dialogue with {args.agent}. Type a message; end-of-input concludes.")
    while True:
        try:
            line = input(f"{session.human_label}> ")
        except EOFError:
            print()
            break
        if not line.strip():
            continue
        reply = runner.post_dialogue_message(session, line)
        print(f"{args.agent}: {reply}")
    runner.conclude_dialogue(session)
    print("Dialogue concluded; the exchange entered the agent's memory.")
    if args.save is not None:
        runner.save(args.save)
        print(f"world written to {args.save}")
    return 0


def _cmd_analyze(args) -> int:
    run_dir = args.dir
    snapshot_path = run_dir / SNAPSHOT_FILENAME
    log_path = run_dir / LOG_FILENAME
    if not snapshot_path.exists():
        raise FileNotFoundError(f"no snapshot at {snapshot_path}")
    world = load_snapshot(snapshot_path)
    log_text = log_path.read_text(encoding="utf-8") if log_path.exists() else ""
    analysis = analyze_run(world, log_text, phrases=args.phrase)
    sys.stdout.write(render_report(analysis))
    write_analysis(analysis, run_dir)
    return 0


_COMMANDS = {
    "init": _cmd_init,
    "run": _cmd_run,
    "serve": _cmd_serve,
    "dialogue": _cmd_dialogue,
    "analyze": _cmd_analyze,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return RUNTIME_EXIT
    except Exception as exc:  # runtime failures exit 2 with a one-line cause
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
