"""Shared builders for tests: scenes, corpora, plans, synthetic traffic.

The traffic generator is test scaffolding only — it fabricates plausible
room activity (commands, verses, gifts, noise) as a reproducible event
log for determinism and invariant tests.
"""

from __future__ import annotations

import json
import random
from decimal import Decimal
from pathlib import Path

from arsls.events import RoomEvent, EventKind, encode_event
from arsls.plan import PlannedRound, SessionPlan
from arsls.scene import SceneConfig, load_scene
from arsls.verse import RoundMode, RoundSpec, VerseCorpus, WinEffect, load_corpus


def scene_doc(
    width: int = 320,
    height: int = 200,
    water: list[list[float]] | None = None,
    occluders: list[dict] | None = None,
    lotus_spawn: dict | None = None,
    tuning: dict | None = None,
) -> dict:
    if water is None:
        water = [[10, 100], [310, 100], [310, 190], [10, 190]]
    return {
        "screen": {"width_px": width, "height_px": height},
        "background_ref": "",
        "water": water,
        "occluders": occluders or [],
        "firework_spawn": [[20, 90], [300, 90]],
        "lotus_spawn": lotus_spawn or {"center": [60, 140], "radius": 20},
        "tuning": tuning or {},
    }


def make_scene(**kwargs) -> SceneConfig:
    return load_scene(json.dumps(scene_doc(**kwargs)))


# A handful of real classical lines (keyword rounds use 花) plus tagged
# entries for theme rounds.
CORPUS_TEXT = """\
# test corpus
感时花溅泪\t春望\tflower,tang
花近高楼伤客心\t登楼\tflower,tang
乱花渐欲迷人眼\t钱塘湖春行\tflower,hangzhou-jiangnan
接天莲叶无穷碧\t晓出净慈寺送林子方\thangzhou-jiangnan
映日荷花别样红\t晓出净慈寺送林子方\tflower,hangzhou-jiangnan
欲把西湖比西子\t饮湖上初晴后雨\thangzhou-jiangnan
明月几时有\t水调歌头\tmoon
江南忆最忆是杭州\t忆江南\thangzhou-jiangnan
one flower line\tsample\tflower
second flower verse\tsample\tflower
third flower couplet\tsample\tflower,hangzhou-jiangnan
plain water line\tsample\t
"""


def make_corpus() -> VerseCorpus:
    return load_corpus(CORPUS_TEXT)


def synthetic_corpus(n: int = 50, keyword: str = "flower", theme: str = "hangzhou-jiangnan") -> VerseCorpus:
    """n distinct verses; even indices contain the keyword, every third
    carries the theme tag."""
    lines = []
    for i in range(n):
        word = keyword if i % 2 == 0 else "willow"
        tags = theme if i % 3 == 0 else ""
        lines.append(f"the {word} verse number {i}\tsynthetic\t{tags}")
    return load_corpus("\n".join(lines))


def quick_round(mode: RoundMode = RoundMode.KEYWORD, value: str = "flower",
                effect: WinEffect = WinEffect.PETAL_FIELD,
                duration_ms: int = 60_000, threshold: int = 3) -> RoundSpec:
    return RoundSpec(mode, value, effect, duration_ms=duration_ms, threshold=threshold)


def quick_plan(total_ms: int = 10_000, seed: int = 42,
               rounds: tuple[PlannedRound, ...] = ()) -> SessionPlan:
    return SessionPlan(total_duration_ms=total_ms, rounds=rounds, seed=seed)


def chat(user: str, ts_ms: int, text: str, name: str | None = None) -> RoomEvent:
    return RoomEvent(EventKind.CHAT, user, name or user.title(), ts_ms, text=text)


def gift(user: str, ts_ms: int, amount: str, name: str | None = None) -> RoomEvent:
    return RoomEvent(EventKind.GIFT, user, name or user.title(), ts_ms,
                     amount_cny=Decimal(amount).quantize(Decimal("0.01")))


def write_log(path: Path, events: list[RoomEvent]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(encode_event(event) + "\n")
    return path


def gen_events(
    rng: random.Random,
    duration_ms: int,
    users: int = 15,
    rate_per_s: float = 2.0,
    verses: list[str] = (),
) -> list[RoomEvent]:
    """Poisson-ish synthetic room traffic covering all five features."""
    events: list[RoomEvent] = []
    t = 0.0
    while True:
        t += rng.expovariate(rate_per_s) * 1000.0
        if t >= duration_ms:
            break
        user = f"u{rng.randrange(users)}"
        roll = rng.random()
        if roll < 0.25:
            text = "release my lotus"
        elif roll < 0.35:
            text = "dash my lotus"
        elif roll < 0.50:
            text = "feed fish"
        elif roll < 0.60 and verses:
            text = rng.choice(verses)
        elif roll < 0.68:
            text = "#MyStory " + rng.choice(["missing the lake", "hello from afar", "good old days"])
        elif roll < 0.85:
            text = rng.choice(["so pretty!", "what a view", "greetings all", "lovely evening"])
        else:
            amount = rng.choice(["1.00", "5.00", "9.90", "9.99", "10.00", "13.14", "52.00"])
            events.append(gift(user, int(t), amount))
            continue
        events.append(chat(user, int(t), text))
    return events
