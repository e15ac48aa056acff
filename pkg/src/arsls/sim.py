"""Deterministic fixed-timestep simulation of all scene entities.

The state is fully determined by (seed, scene config, ordered event
stream, tick schedule).  Every externally visible outcome — spawns,
despawns, rejections, judgments, ripples — is appended to an effect log
whose hash is the determinism oracle for live-vs-replay equivalence.

Time never comes from a wall clock here: `now_ms` is derived from the
tick index, and event timestamps are quantized to ticks by the session
layer before they reach this module.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from typing import IO

from arsls.events import Command, CommandKind
from arsls.rng import LabeledRng
from arsls.scene import Point, SceneConfig
from arsls.verse import (
    JudgmentResult,
    Outcome,
    RoundSpec,
    VerseCorpus,
    VerseRound,
    WinEffect,
    start_round,
)

# Sprite extents and effect shape constants.  Art direction of the
# placeholder sprites, not physics: despawn rules and tests key off them.
LOTUS_HALF_PX = 12.0
FISH_HALF_PX = 10.0
UMBRELLA_HALF_PX = 16.0
FIREWORK_RISE_PX = 180.0
FIREWORK_BURST_MS = 900
FIREWORK_PARTICLES = 24
FISH_JUMP_HEIGHT_PX = 60.0
FISH_LOOK_COUNT = 4
UMBRELLA_TEXTURE_COUNT = 6
BOB_AMPLITUDE_PX_S = 3.0
BOB_PERIOD_MS = 2000.0
VOLLEY_COUNT = 8
VOLLEY_SPAN_MS = 3000.0

GIFT_UMBRELLA_THRESHOLD = Decimal("10.00")


@dataclass
class Lotus:
    entity_id: int
    owner_id: str
    owner_name: str
    pos: Point
    vel: tuple[float, float]
    spawned_at_ms: float
    bob_phase: float
    dash_until_ms: float | None = None
    next_ripple_at_ms: float = 0.0


@dataclass
class Fish:
    entity_id: int
    food_pos: Point
    started_at_ms: float
    look_id: int


@dataclass
class Firework:
    entity_id: int
    tipper_name: str
    spawn: Point
    apex: Point
    launched_at_ms: float
    flight_ms: float
    # (angle, speed) pairs drawn at explosion time
    particles: list[tuple[float, float]] = field(default_factory=list)
    exploded: bool = False


@dataclass
class Umbrella:
    entity_id: int
    owner_id: str
    owner_name: str
    texture_id: int
    story: str
    pos: Point
    ascent_px_s: float


@dataclass
class UmbrellaToken:
    token_id: int
    owner_id: str
    granted_at_ms: float
    texture_id: int
    consumed: bool = False


@dataclass
class Ripple:
    center: Point
    born_at_ms: float


class EffectLog:
    """Append-only record of every simulation-visible outcome.

    Records are canonicalized (sorted keys, compact JSON) and hashed as
    they arrive; the hex digest is the session's identity.  Optionally
    mirrors each line to a file and keeps the full list in memory.
    """

    def __init__(self, out: IO[str] | None = None, keep: bool = True, track_recent: bool = False):
        self._hasher = hashlib.sha256()
        self._out = out
        self._keep = keep
        self._track_recent = track_recent
        self.records: list[dict] = []
        self._recent: list[dict] = []
        self.count = 0

    def append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        self._hasher.update(line.encode("utf-8"))
        self._hasher.update(b"\n")
        if self._out is not None:
            self._out.write(line + "\n")
        if self._keep:
            self.records.append(record)
        if self._track_recent:
            self._recent.append(record)
        self.count += 1

    def drain_recent(self) -> list[dict]:
        """Records appended since the last drain (for client notices)."""
        recent, self._recent = self._recent, []
        return recent

    def digest(self) -> str:
        return self._hasher.hexdigest()


@dataclass
class SimState:
    cfg: SceneConfig
    corpus: VerseCorpus
    seed: int
    rng: LabeledRng = field(init=False)
    log: EffectLog = field(default_factory=EffectLog)
    tick: int = 0
    lotuses: dict[str, Lotus] = field(default_factory=dict)
    fishes: list[Fish] = field(default_factory=list)
    fireworks: list[Firework] = field(default_factory=list)
    umbrellas: list[Umbrella] = field(default_factory=list)
    ripples: list[Ripple] = field(default_factory=list)
    tokens: dict[str, list[UmbrellaToken]] = field(default_factory=dict)
    pending_fireworks: list[tuple[float, Point, str]] = field(default_factory=list)
    petal_field: bool = False
    round: VerseRound | None = None
    counters: Counter = field(default_factory=Counter)
    _next_id: int = 1

    def __post_init__(self) -> None:
        self.rng = LabeledRng(self.seed)

    @property
    def now_ms(self) -> float:
        # (tick*1000)/hz instead of tick*(1000/hz): exact integer
        # numerator keeps whole-ms tick times exact (e.g. tick 5400 at
        # 30 Hz is 180000.0, not 180000.00000000003).
        return self.tick * 1000.0 / self.cfg.tuning.tick_hz

    def _new_id(self) -> int:
        eid = self._next_id
        self._next_id += 1
        return eid

    def emit(self, kind: str, user_id: str | None = None, **data) -> None:
        record: dict = {"tick": self.tick, "kind": kind}
        if user_id is not None:
            record["user_id"] = user_id
        record.update(data)
        self.log.append(record)

    def digest(self) -> str:
        return self.log.digest()

    # ------------------------------------------------------------------
    # event application
    # ------------------------------------------------------------------

    def apply_command(self, user_id: str, display_name: str, command: Command, now_ms: float) -> None:
        self.counters[f"command.{command.kind.value}"] += 1
        kind = command.kind
        if kind is CommandKind.RELEASE_LOTUS:
            self._release_lotus(user_id, display_name, now_ms)
        elif kind is CommandKind.DASH_LOTUS:
            self._dash_lotus(user_id, now_ms)
        elif kind is CommandKind.FEED_FISH:
            self._feed_fish(user_id, now_ms)
        elif kind is CommandKind.STORY:
            self._attach_story(user_id, display_name, command.text or "", now_ms)
        else:
            self._plain_chat(user_id, display_name, command.text or "", now_ms)

    def _release_lotus(self, user_id: str, display_name: str, now_ms: float) -> None:
        if user_id in self.lotuses:
            self.counters["rejections"] += 1
            self.emit("rejected", user_id, action="release_lotus", reason="AlreadyHasLotus")
            return
        disk = self.cfg.lotus_spawn
        rng = self.rng.stream("lotus_spawn")
        r = disk.radius * math.sqrt(rng.random())
        theta = rng.random() * 2.0 * math.pi
        pos = Point(disk.center.x + r * math.cos(theta), disk.center.y + r * math.sin(theta))
        bob_phase = self.rng.stream("lotus_bob").random() * 2.0 * math.pi
        lotus = Lotus(
            entity_id=self._new_id(),
            owner_id=user_id,
            owner_name=display_name,
            pos=pos,
            vel=(self.cfg.tuning.lotus_drift_px_s, 0.0),
            spawned_at_ms=now_ms,
            bob_phase=bob_phase,
            next_ripple_at_ms=now_ms + self.cfg.tuning.ripple_period_ms,
        )
        self.lotuses[user_id] = lotus
        self.counters["lotuses_spawned"] += 1
        self.emit("lotus_spawned", user_id, id=lotus.entity_id, x=pos.x, y=pos.y)
        self._splash(pos, now_ms)

    def _dash_lotus(self, user_id: str, now_ms: float) -> None:
        lotus = self.lotuses.get(user_id)
        if lotus is None:
            self.counters["rejections"] += 1
            self.emit("rejected", user_id, action="dash_lotus", reason="NoLotus")
            return
        angle = self.rng.stream("dash").random() * 2.0 * math.pi
        speed = self.cfg.tuning.lotus_drift_px_s * self.cfg.tuning.lotus_dash_multiplier
        lotus.vel = (math.cos(angle) * speed, math.sin(angle) * speed)
        lotus.dash_until_ms = now_ms + self.cfg.tuning.dash_duration_ms
        self.emit("lotus_dash", user_id, id=lotus.entity_id, angle=angle)

    def _feed_fish(self, user_id: str, now_ms: float) -> None:
        food_pos = self._random_water_point("fish_food")
        look_id = self.rng.stream("fish_look").randrange(FISH_LOOK_COUNT)
        fish = Fish(self._new_id(), food_pos, now_ms, look_id)
        self.fishes.append(fish)
        self.counters["fish_spawned"] += 1
        self.emit("fish_spawned", user_id, id=fish.entity_id, x=food_pos.x, y=food_pos.y, look=look_id)
        self._splash(food_pos, now_ms)

    def _attach_story(self, user_id: str, display_name: str, story: str, now_ms: float) -> None:
        token = next((t for t in self.tokens.get(user_id, []) if not t.consumed), None)
        if token is None:
            self.counters["rejections"] += 1
            self.emit("rejected", user_id, action="story", reason="NoToken")
            return
        token.consumed = True
        self.counters["tokens_consumed"] += 1
        bbox = self.cfg.water.bbox()
        x = self.rng.stream("umbrella_x").uniform(bbox[0], bbox[2])
        umbrella = Umbrella(
            entity_id=self._new_id(),
            owner_id=user_id,
            owner_name=display_name,
            texture_id=token.texture_id,
            story=story,
            pos=Point(x, self.cfg.height_px + UMBRELLA_HALF_PX),
            ascent_px_s=self.cfg.tuning.umbrella_ascent_px_s,
        )
        self.umbrellas.append(umbrella)
        self.emit(
            "umbrella_spawned", user_id,
            id=umbrella.entity_id, texture=token.texture_id, story=story, x=x,
        )

    def _plain_chat(self, user_id: str, display_name: str, text: str, now_ms: float) -> None:
        self.emit("chat", user_id, name=display_name, text=text)
        if self.round is not None and self.round.outcome is Outcome.RUNNING:
            result = self.round.submit(self.corpus, text, int(now_ms))
            self.counters[f"judgment.{result.value}"] += 1
            self.emit("verse_judged", user_id, result=result.value, combo=self.round.combo)
            if self.round.outcome is Outcome.WON:
                self.emit("round_won", count=len(self.round.accepted), at_ms=self.round.won_at_ms)
                self.win_effect(self.round.spec.win_effect, now_ms)

    def apply_gift(self, user_id: str, display_name: str, amount_cny: Decimal, now_ms: float) -> None:
        """Route a settled gift by amount tier: below 10 CNY buys a
        firework, 10 CNY or above grants a story-umbrella token."""
        self.counters["gifts"] += 1
        if amount_cny == 0:
            return
        if amount_cny < GIFT_UMBRELLA_THRESHOLD:
            self._launch_firework(display_name, now_ms, user_id=user_id, amount=str(amount_cny))
        else:
            texture_id = self.rng.stream("umbrella_texture").randrange(UMBRELLA_TEXTURE_COUNT)
            token = UmbrellaToken(self._new_id(), user_id, now_ms, texture_id)
            self.tokens.setdefault(user_id, []).append(token)
            self.counters["tokens_granted"] += 1
            self.emit("token_granted", user_id, texture=texture_id, amount=str(amount_cny))

    def _launch_firework(self, tipper_name: str, now_ms: float, user_id: str | None = None,
                         amount: str | None = None, spawn: Point | None = None) -> None:
        if spawn is None:
            spawn = self.cfg.firework_spawn.lerp(self.rng.stream("firework_spawn").random())
        firework = Firework(
            entity_id=self._new_id(),
            tipper_name=tipper_name,
            spawn=spawn,
            apex=Point(spawn.x, spawn.y - FIREWORK_RISE_PX),
            launched_at_ms=now_ms,
            flight_ms=self.cfg.tuning.firework_flight_ms,
        )
        self.fireworks.append(firework)
        self.counters["fireworks"] += 1
        extra = {"amount": amount} if amount is not None else {}
        self.emit("firework_launched", user_id, id=firework.entity_id, name=tipper_name,
                  x=spawn.x, y=spawn.y, **extra)

    def win_effect(self, effect: WinEffect, now_ms: float) -> None:
        """Apply a round's unlocked effect: the lasting petal field, or a
        volley of fireworks staggered along the far-end segment."""
        if effect is WinEffect.PETAL_FIELD:
            self.petal_field = True
            self.emit("petal_field_unlocked")
        else:
            rng = self.rng.stream("volley")
            for i in range(VOLLEY_COUNT):
                at_ms = now_ms + i * (VOLLEY_SPAN_MS / VOLLEY_COUNT)
                spawn = self.cfg.firework_spawn.lerp(rng.random())
                self.pending_fireworks.append((at_ms, spawn, "everyone"))
            self.emit("firework_volley_scheduled", count=VOLLEY_COUNT)

    # ------------------------------------------------------------------
    # round control (driven by the session plan)
    # ------------------------------------------------------------------

    def start_round(self, spec: RoundSpec, now_ms: float) -> None:
        self.round = start_round(spec, int(now_ms), self.round)
        self.emit("round_started", mode=spec.mode.value, value=spec.value,
                  duration_ms=spec.duration_ms, threshold=spec.threshold)

    # ------------------------------------------------------------------
    # fixed-timestep advance
    # ------------------------------------------------------------------

    def _random_water_point(self, label: str) -> Point:
        """Uniform point in the water polygon via rejection sampling over
        its bounding box, on the given substream."""
        rng = self.rng.stream(label)
        x0, y0, x1, y1 = self.cfg.water.bbox()
        for _ in range(100_000):
            p = Point(rng.uniform(x0, x1), rng.uniform(y0, y1))
            if self.cfg.point_in_water(p):
                return p
        raise RuntimeError("water polygon has no interior to sample")

    def _splash(self, pos: Point, now_ms: float) -> None:
        if self.cfg.point_in_water(pos):
            self.ripples.append(Ripple(pos, now_ms))
            self.emit("ripple", x=pos.x, y=pos.y)

    def _fully_offscreen(self, pos: Point, half: float) -> bool:
        return (
            pos.x - half > self.cfg.width_px
            or pos.x + half < 0
            or pos.y - half > self.cfg.height_px
            or pos.y + half < 0
        )

    def advance_tick(self) -> None:
        """Advance the world by exactly one tick (1000/tick_hz ms)."""
        tuning = self.cfg.tuning
        t0 = self.now_ms
        t1 = (self.tick + 1) * 1000.0 / tuning.tick_hz
        dt_s = (t1 - t0) / 1000.0

        if self.round is not None and self.round.outcome is Outcome.RUNNING:
            self.round.tick(int(t0))
            if self.round.outcome is Outcome.LOST:
                self.emit("round_lost", count=len(self.round.accepted))

        # Lotuses: dash expiry, integration, ripple cadence, screen exit.
        for owner_id in list(self.lotuses):
            lotus = self.lotuses[owner_id]
            if lotus.dash_until_ms is not None and t0 >= lotus.dash_until_ms:
                lotus.dash_until_ms = None
                lotus.vel = (tuning.lotus_drift_px_s, 0.0)
            vx, vy = lotus.vel
            if lotus.dash_until_ms is None:
                phase = 2.0 * math.pi * (t0 - lotus.spawned_at_ms) / BOB_PERIOD_MS
                vy = BOB_AMPLITUDE_PX_S * math.sin(phase + lotus.bob_phase)
            lotus.pos = Point(lotus.pos.x + vx * dt_s, lotus.pos.y + vy * dt_s)
            if self._fully_offscreen(lotus.pos, LOTUS_HALF_PX):
                del self.lotuses[owner_id]
                self.counters["lotuses_despawned"] += 1
                self.emit("lotus_despawned", owner_id, id=lotus.entity_id)
                continue
            while lotus.next_ripple_at_ms <= t1:
                if self.cfg.point_in_water(lotus.pos):
                    self.ripples.append(Ripple(lotus.pos, lotus.next_ripple_at_ms))
                    self.emit("ripple", x=lotus.pos.x, y=lotus.pos.y)
                lotus.next_ripple_at_ms += tuning.ripple_period_ms

        # Fish live exactly one jump; splash again on re-entry.
        survivors = []
        for fish in self.fishes:
            if t1 - fish.started_at_ms >= tuning.fish_jump_duration_ms:
                self.emit("fish_done", id=fish.entity_id)
                self._splash(fish.food_pos, t1)
            else:
                survivors.append(fish)
        self.fishes = survivors

        # Fireworks: ascend, explode once with a seeded burst, despawn.
        survivors_fw = []
        for fw in self.fireworks:
            age = t1 - fw.launched_at_ms
            if not fw.exploded and age >= fw.flight_ms:
                fw.exploded = True
                rng = self.rng.stream("firework_burst")
                fw.particles = [
                    (rng.random() * 2.0 * math.pi, 40.0 + rng.random() * 80.0)
                    for _ in range(FIREWORK_PARTICLES)
                ]
                self.emit("firework_exploded", id=fw.entity_id, name=fw.tipper_name,
                          x=fw.apex.x, y=fw.apex.y)
            if fw.exploded and age >= fw.flight_ms + FIREWORK_BURST_MS:
                self.emit("firework_done", id=fw.entity_id)
            else:
                survivors_fw.append(fw)
        self.fireworks = survivors_fw

        # Umbrellas rise until fully above the top edge.
        survivors_um = []
        for um in self.umbrellas:
            um.pos = Point(um.pos.x, um.pos.y - um.ascent_px_s * dt_s)
            if um.pos.y + UMBRELLA_HALF_PX < 0:
                self.emit("umbrella_done", um.owner_id, id=um.entity_id)
            else:
                survivors_um.append(um)
        self.umbrellas = survivors_um

        # Volley fireworks whose scheduled time has come.
        due = [p for p in self.pending_fireworks if p[0] <= t1]
        if due:
            self.pending_fireworks = [p for p in self.pending_fireworks if p[0] > t1]
            for at_ms, spawn, name in due:
                self._launch_firework(name, at_ms, spawn=spawn)

        self.ripples = [r for r in self.ripples if t1 - r.born_at_ms < tuning.ripple_lifetime_ms]

        self.tick += 1


def fish_render_pos(fish: Fish, now_ms: float, jump_duration_ms: float) -> Point:
    """Parabolic arc over the food drop point, apex at half the jump."""
    t = (now_ms - fish.started_at_ms) / jump_duration_ms
    t = min(max(t, 0.0), 1.0)
    return Point(fish.food_pos.x, fish.food_pos.y - 4.0 * FISH_JUMP_HEIGHT_PX * t * (1.0 - t))


def firework_render_pos(fw: Firework, now_ms: float) -> Point:
    """Position of the shell while ascending; the apex afterwards."""
    t = (now_ms - fw.launched_at_ms) / fw.flight_ms
    if t >= 1.0:
        return fw.apex
    t = max(t, 0.0)
    return Point(
        fw.spawn.x + (fw.apex.x - fw.spawn.x) * t,
        fw.spawn.y + (fw.apex.y - fw.spawn.y) * t,
    )
