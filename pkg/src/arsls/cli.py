"""Command line entry points: serve a live room, replay a recording,
diff two effect logs.

    arsls serve  --config room.json [--seed N --scene S --corpus C --plan P --record PATH]
    arsls replay --log L [--config room.json] --scene S --corpus C [--plan P] [--seed N]
                 [--frames DIR] [--every K] [--report out.json]
    arsls diff A B

Replaying a live recording needs the same room config the session ran
with (scene, corpus, plan, seed, command synonyms); flags override
config entries either way.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from arsls.events import DEFAULT_COMMANDS, CommandTable
from arsls.plan import SessionPlan, default_plan, load_plan
from arsls.replay import diff_traces, replay
from arsls.scene import SceneConfig, load_scene
from arsls.verse import VerseCorpus, load_corpus


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_inputs(
    args: argparse.Namespace,
) -> tuple[SceneConfig, VerseCorpus, SessionPlan, CommandTable, dict]:
    """Resolve scene/corpus/plan/seed/commands from an optional room
    config file plus flag overrides (flags win).  The command-synonym
    table travels with the room config because the trigger grammar is
    simulation input: a replay must parse exactly like its recording."""
    config: dict = {}
    if getattr(args, "config", None):
        config = json.loads(_read(args.config))

    scene_path = args.scene or config.get("scene")
    if not scene_path:
        raise SystemExit("a scene is required (--scene or config)")
    corpus_path = args.corpus or config.get("corpus")
    plan_path = args.plan or config.get("plan")
    seed = args.seed if args.seed is not None else config.get("seed")

    scene = load_scene(_read(scene_path))
    corpus = load_corpus(_read(corpus_path)) if corpus_path else load_corpus("")
    if plan_path:
        plan = load_plan(_read(plan_path), seed_override=seed)
    else:
        plan = default_plan(seed if seed is not None else 0)
    commands = DEFAULT_COMMANDS
    if isinstance(config.get("command_synonyms"), dict):
        commands = CommandTable().with_synonyms(config["command_synonyms"])
    return scene, corpus, plan, commands, config


def _cmd_replay(args: argparse.Namespace) -> int:
    scene, corpus, plan, commands, _ = _load_inputs(args)
    out = open(args.effects, "w", encoding="utf-8") if args.effects else None
    try:
        report = replay(
            args.log, scene, corpus, plan, commands=commands,
            frames_dir=args.frames, every=args.every, effect_log_out=out,
        )
    finally:
        if out:
            out.close()
    payload = json.dumps(report.to_json(), indent=2, ensure_ascii=False)
    if args.report:
        Path(args.report).write_text(payload + "\n", encoding="utf-8")
    print(payload)
    return 0


def _cmd_diff(args: argparse.Namespace) -> int:
    result = diff_traces(args.a, args.b)
    if result is None:
        print("Equal")
        return 0
    print(result.describe())
    return 1


def _cmd_serve(args: argparse.Namespace) -> int:
    from arsls.server import RoomServer

    scene, corpus, plan, commands, config = _load_inputs(args)
    record = args.record or config.get("record")

    server = RoomServer(
        scene, corpus, plan,
        commands=commands,
        host=args.host,
        http_port=args.http_port if args.http_port is not None else config.get("http_port", 8400),
        ingest_port=args.ingest_port if args.ingest_port is not None else config.get("ingest_port", 8401),
        time_scale=args.time_scale if args.time_scale is not None else config.get("time_scale", 1.0),
        record_path=record,
    )

    async def main() -> None:
        await server.start()
        print(json.dumps({
            "event": "listening",
            "http_port": server.http_port,
            "ingest_port": server.ingest_port,
        }), flush=True)
        try:
            await server.wait_finished()
        finally:
            await server.stop()
            if server.final_digest:
                print(json.dumps({"event": "finished", "digest": server.final_digest}), flush=True)

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arsls", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_replay = sub.add_parser("replay", help="replay a recorded event log deterministically")
    p_replay.add_argument("--log", required=False, default=None, help="event log path (omit for a pure tick schedule)")
    p_replay.add_argument("--config", default=None, help="room config JSON (same one the session ran with)")
    p_replay.add_argument("--scene", default=None)
    p_replay.add_argument("--corpus", default=None)
    p_replay.add_argument("--plan", default=None)
    p_replay.add_argument("--seed", type=int, default=None)
    p_replay.add_argument("--frames", default=None, help="directory for per-tick PNG dumps")
    p_replay.add_argument("--every", type=int, default=1, help="dump every K-th tick")
    p_replay.add_argument("--report", default=None, help="write the JSON report here")
    p_replay.add_argument("--effects", default=None, help="write the effect log here")
    p_replay.set_defaults(func=_cmd_replay)

    p_diff = sub.add_parser("diff", help="first divergence between two effect logs")
    p_diff.add_argument("a")
    p_diff.add_argument("b")
    p_diff.set_defaults(func=_cmd_diff)

    p_serve = sub.add_parser("serve", help="run a live room session")
    p_serve.add_argument("--config", default=None, help="room config JSON")
    p_serve.add_argument("--scene", default=None)
    p_serve.add_argument("--corpus", default=None)
    p_serve.add_argument("--plan", default=None)
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--record", default=None, help="append accepted events to this file")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--http-port", type=int, default=None)
    p_serve.add_argument("--ingest-port", type=int, default=None)
    p_serve.add_argument("--time-scale", type=float, default=None,
                         help="1.0 = real time, 0 = as fast as possible")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
