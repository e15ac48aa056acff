"""Session plan: total duration, scheduled verse rounds, seed.

The default plan mirrors the deployed session shape: a 20-minute room
with a keyword round at the third minute (keyword "flower", petal-field
reward) and a theme round at the eleventh ("hangzhou-jiangnan",
firework-volley reward), both five minutes long.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from arsls.verse import RoundMode, RoundSpec, WinEffect

DEFAULT_TOTAL_DURATION_MS = 1_200_000
DEFAULT_ROUND_STARTS_MS = (180_000, 660_000)


@dataclass(frozen=True)
class PlannedRound:
    at_ms: int
    spec: RoundSpec

    @property
    def end_ms(self) -> int:
        return self.at_ms + self.spec.duration_ms


@dataclass(frozen=True)
class SessionPlan:
    total_duration_ms: int = DEFAULT_TOTAL_DURATION_MS
    rounds: tuple[PlannedRound, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.total_duration_ms <= 0:
            raise ValueError("total_duration_ms must be positive")
        ordered = sorted(self.rounds, key=lambda r: r.at_ms)
        for r in ordered:
            if r.at_ms < 0 or r.end_ms > self.total_duration_ms:
                raise ValueError(
                    f"round at {r.at_ms} ms does not fit inside the {self.total_duration_ms} ms session"
                )
        for earlier, later in zip(ordered, ordered[1:]):
            if later.at_ms < earlier.end_ms:
                raise ValueError(
                    f"rounds at {earlier.at_ms} and {later.at_ms} ms overlap"
                )
        object.__setattr__(self, "rounds", tuple(ordered))


def default_plan(seed: int = 0) -> SessionPlan:
    return SessionPlan(
        total_duration_ms=DEFAULT_TOTAL_DURATION_MS,
        rounds=(
            PlannedRound(
                DEFAULT_ROUND_STARTS_MS[0],
                RoundSpec(RoundMode.KEYWORD, "flower", WinEffect.PETAL_FIELD),
            ),
            PlannedRound(
                DEFAULT_ROUND_STARTS_MS[1],
                RoundSpec(RoundMode.THEME, "hangzhou-jiangnan", WinEffect.FIREWORK_VOLLEY),
            ),
        ),
        seed=seed,
    )


def load_plan(document: str | bytes, seed_override: int | None = None) -> SessionPlan:
    """Parse a plan JSON document.  Omitted fields take the defaults;
    `seed_override` wins over a seed in the file."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    obj = json.loads(document)
    if not isinstance(obj, dict):
        raise ValueError("plan: top level must be an object")
    rounds = []
    for i, raw in enumerate(obj.get("rounds", [])):
        if not isinstance(raw, dict):
            raise ValueError(f"plan.rounds[{i}]: expected an object")
        try:
            spec = RoundSpec(
                mode=RoundMode(raw["mode"]),
                value=str(raw["value"]),
                win_effect=WinEffect(raw["win_effect"]),
                duration_ms=int(raw.get("duration_ms", 300_000)),
                threshold=int(raw.get("threshold", 20)),
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"plan.rounds[{i}]: {exc}") from exc
        rounds.append(PlannedRound(int(raw["at_ms"]), spec))
    seed = seed_override if seed_override is not None else int(obj.get("seed", 0))
    return SessionPlan(
        total_duration_ms=int(obj.get("total_duration_ms", DEFAULT_TOTAL_DURATION_MS)),
        rounds=tuple(rounds),
        seed=seed,
    )


def plan_to_json(plan: SessionPlan) -> dict:
    return {
        "total_duration_ms": plan.total_duration_ms,
        "seed": plan.seed,
        "rounds": [
            {
                "at_ms": r.at_ms,
                "mode": r.spec.mode.value,
                "value": r.spec.value,
                "duration_ms": r.spec.duration_ms,
                "threshold": r.spec.threshold,
                "win_effect": r.spec.win_effect.value,
            }
            for r in plan.rounds
        ],
    }
