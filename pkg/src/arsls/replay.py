"""Offline deterministic runner over recorded event logs.

Replays a log against a scene/corpus/plan with a virtual clock (no
sleeping), producing the effect log, its digest, counters, and optional
per-tick PNG frames.  Identical inputs always produce identical digests,
which is the backbone of every determinism test and of live-session
auditing.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

from arsls.compose import build_render_list, encode_frame, load_background, rasterize
from arsls.events import CommandTable, DEFAULT_COMMANDS, DecodeError, decode_event
from arsls.plan import SessionPlan
from arsls.scene import SceneConfig
from arsls.session import SessionRunner
from arsls.verse import VerseCorpus


class ReplayInputError(ValueError):
    """A replay input failed to parse; message carries file and line."""


@dataclass
class ReplayReport:
    digest: str
    counters: dict[str, int]
    round_outcomes: list[str]
    ticks: int
    wall_time_ms: float
    decode_errors: int = 0

    def to_json(self) -> dict:
        return {
            "digest": self.digest,
            "counters": dict(sorted(self.counters.items())),
            "round_outcomes": self.round_outcomes,
            "ticks": self.ticks,
            "decode_errors": self.decode_errors,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }


def read_event_log(path: str | Path) -> list[tuple[int, int | None, "object"]]:
    """Parse a recorded log into (seq, recv_tick, RoomEvent) tuples.

    Each line is the wire format, optionally annotated by the recorder
    with `recv_tick` (the tick at which a live session enqueued it).
    Blank lines are skipped.  Malformed lines raise ReplayInputError with
    the line number — a replay input is a trusted artifact, unlike the
    live socket where garbage is merely counted.
    """
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            event = decode_event(line)
            if isinstance(event, DecodeError):
                raise ReplayInputError(f"{path}:{line_no}: {event.kind.value}: {event.detail}")
            recv_tick = None
            try:
                raw = json.loads(line)
                if isinstance(raw.get("recv_tick"), int):
                    recv_tick = raw["recv_tick"]
            except json.JSONDecodeError:  # decode_event already accepted it
                pass
            out.append((len(out), recv_tick, event))
    return out


def replay(
    log_path: str | Path | None,
    scene: SceneConfig,
    corpus: VerseCorpus,
    plan: SessionPlan,
    commands: CommandTable = DEFAULT_COMMANDS,
    frames_dir: str | Path | None = None,
    every: int = 1,
    effect_log_out=None,
) -> ReplayReport:
    """Run a full session offline.  With `frames_dir`, one PNG per
    `every` ticks is written as frames/NNNNNN.png.

    `commands` must match the table the recording session ran with: the
    trigger grammar is simulation input, so a synonym mismatch changes
    the digest.
    """
    started = time.perf_counter()
    runner = SessionRunner(scene, corpus, plan, commands=commands,
                           log_out=effect_log_out, keep_log=False)

    if log_path is not None:
        for seq, recv_tick, event in read_event_log(log_path):
            runner.submit(event, seq, recv_tick)

    background = load_background(scene) if frames_dir is not None else None
    if frames_dir is not None:
        Path(frames_dir).mkdir(parents=True, exist_ok=True)

    seen_rounds: list = []
    while not runner.finished:
        if background is not None and runner.tick % every == 0:
            board = runner.state.round.board_view(int(runner.state.now_ms)) if runner.state.round else None
            frame = rasterize(build_render_list(runner.state, scene, board), scene, background)
            name = Path(frames_dir) / f"{runner.tick:06d}.png"
            name.write_bytes(encode_frame(frame))
        runner.run_tick()
        current = runner.state.round
        if current is not None and (not seen_rounds or seen_rounds[-1] is not current):
            seen_rounds.append(current)

    wall_ms = (time.perf_counter() - started) * 1000.0
    return ReplayReport(
        digest=runner.digest(),
        counters=dict(runner.state.counters),
        round_outcomes=[r.outcome.value for r in seen_rounds],
        ticks=runner.tick,
        wall_time_ms=wall_ms,
    )


@dataclass(frozen=True)
class TraceDiff:
    line_no: int
    a: str | None
    b: str | None

    def describe(self) -> str:
        left = self.a if self.a is not None else "<end of file>"
        right = self.b if self.b is not None else "<end of file>"
        return f"first divergence at line {self.line_no}:\n  a: {left}\n  b: {right}"


def diff_traces(path_a: str | Path, path_b: str | Path) -> TraceDiff | None:
    """First differing record between two effect logs, or None if equal.
    A truncated file diverges at its end-of-file position."""
    with open(path_a, "r", encoding="utf-8") as fa, open(path_b, "r", encoding="utf-8") as fb:
        line_no = 0
        while True:
            line_no += 1
            la = fa.readline()
            lb = fb.readline()
            if not la and not lb:
                return None
            if la.rstrip("\n") != lb.rstrip("\n"):
                return TraceDiff(
                    line_no,
                    la.rstrip("\n") if la else None,
                    lb.rstrip("\n") if lb else None,
                )
