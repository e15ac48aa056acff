"""The sequencer: one logical thread turning ordered events into ticks.

Both the live server and the offline replayer drive this same core, which
is what makes live-vs-replay digest equality possible.  Events are
quantized to the tick preceding their timestamp; an event that physically
arrives after its tick has passed is applied at the next tick and its
application record is flagged late.

To reproduce lateness offline, the recorder annotates each logged event
with `recv_tick` (the tick at which it entered the queue).  Synthetic
logs without the annotation behave as if everything arrived before the
session started, i.e. pure (ts_ms, arrival-order) application.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from arsls.events import EventKind, RoomEvent, parse_command, CommandTable, DEFAULT_COMMANDS
from arsls.plan import SessionPlan
from arsls.scene import SceneConfig
from arsls.sim import EffectLog, SimState
from arsls.verse import VerseCorpus


@dataclass(frozen=True)
class QueuedEvent:
    event: RoomEvent
    seq: int
    recv_tick: int

    def sort_key(self) -> tuple[int, int]:
        return (self.event.ts_ms, self.seq)


class SessionRunner:
    """Applies plan-scheduled rounds, queued events, and fixed ticks, in
    a deterministic order, over a fresh SimState."""

    def __init__(
        self,
        scene: SceneConfig,
        corpus: VerseCorpus,
        plan: SessionPlan,
        commands: CommandTable = DEFAULT_COMMANDS,
        log_out=None,
        keep_log: bool = True,
        track_recent: bool = False,
    ):
        self.scene = scene
        self.plan = plan
        self.commands = commands
        self.state = SimState(
            cfg=scene,
            corpus=corpus,
            seed=plan.seed,
            log=EffectLog(out=log_out, keep=keep_log, track_recent=track_recent),
        )
        self.total_ticks = self._tick_not_before(plan.total_duration_ms)
        self._round_start_ticks = [self._tick_not_before(r.at_ms) for r in plan.rounds]
        # _arrivals holds events whose recv_tick is still in the future
        # (only replay sees those); _queue holds arrived events ordered
        # by (ts_ms, arrival index).
        self._arrivals: list[tuple[int, int, QueuedEvent]] = []
        self._queue: list[tuple[int, int, QueuedEvent]] = []
        self._next_round_idx = 0

    # All scheduling runs in integer tick space: tick k stands at time
    # k*1000/hz ms, and an event belongs to the tick preceding its
    # timestamp.  Events timestamped past the session end stay queued
    # forever, i.e. they are dropped.
    def quantized_tick(self, ts_ms: int) -> int:
        return ts_ms * self.scene.tuning.tick_hz // 1000

    def _tick_not_before(self, ms: int) -> int:
        hz = self.scene.tuning.tick_hz
        return -((-ms * hz) // 1000)

    @property
    def tick(self) -> int:
        return self.state.tick

    @property
    def finished(self) -> bool:
        return self.state.tick >= self.total_ticks

    def submit(self, event: RoomEvent, seq: int, recv_tick: int | None = None) -> QueuedEvent:
        """Queue a decoded event.  `recv_tick` defaults to "before the
        session", which makes offline logs apply purely by timestamp."""
        queued = QueuedEvent(event, seq, recv_tick if recv_tick is not None else 0)
        if queued.recv_tick > self.state.tick:
            heapq.heappush(self._arrivals, (queued.recv_tick, seq, queued))
        else:
            heapq.heappush(self._queue, (event.ts_ms, seq, queued))
        return queued

    def _due_events(self, tick: int) -> list[QueuedEvent]:
        """Pop every arrived event whose quantized tick has been reached,
        in (ts_ms, arrival) order.  An event cannot apply before it
        arrives, so replayed late events land exactly where live ones did."""
        while self._arrivals and self._arrivals[0][0] <= tick:
            _, seq, queued = heapq.heappop(self._arrivals)
            heapq.heappush(self._queue, (queued.event.ts_ms, seq, queued))
        due: list[QueuedEvent] = []
        while self._queue and self.quantized_tick(self._queue[0][0]) <= tick:
            due.append(heapq.heappop(self._queue)[2])
        return due

    def run_tick(self) -> None:
        """One sequencer step: start any scheduled round, apply due
        events in (ts_ms, arrival) order, advance the world one tick."""
        state = self.state
        tick = state.tick
        now = state.now_ms

        while (
            self._next_round_idx < len(self.plan.rounds)
            and self._round_start_ticks[self._next_round_idx] <= tick
        ):
            state.start_round(self.plan.rounds[self._next_round_idx].spec, now)
            self._next_round_idx += 1

        for queued in self._due_events(tick):
            event = queued.event
            late = queued.recv_tick > self.quantized_tick(event.ts_ms)
            record = {"event": event.kind.value, "ts_ms": event.ts_ms, "seq": queued.seq}
            if late:
                record["late"] = True
            state.emit("event_applied", event.user_id, **record)
            state.counters["events"] += 1
            if event.kind is EventKind.CHAT:
                command = parse_command(event.text or "", self.commands)
                state.apply_command(event.user_id, event.display_name, command, now)
            else:
                state.apply_gift(event.user_id, event.display_name, event.amount_cny, now)

        state.advance_tick()

    def run_to_end(self) -> None:
        while not self.finished:
            self.run_tick()

    def digest(self) -> str:
        return self.state.digest()
