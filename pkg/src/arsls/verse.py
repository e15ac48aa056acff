"""Collaborative verse game: rounds, corpus validation, combo, countdown.

A round announces a keyword (substring match) or a theme (corpus tag).
Viewers quote verses in chat; unique corpus hits accumulate toward a
shared threshold within the round's time window.  Hitting the threshold
wins the round for everyone and unlocks a scene effect.

Validation is corpus membership over normalized text: whitespace and
punctuation stripped, Unicode composed, cased scripts lowered.  That
makes "unique, valid" a hard, replayable predicate instead of a judgment
call.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum


def normalize_verse(text: str) -> str:
    """Canonical form used for corpus membership and dedup.

    Removes all whitespace and all punctuation (ASCII and CJK alike),
    composes to NFC, and lowercases cased scripts.  Idempotent.
    """
    s = unicodedata.normalize("NFC", text)
    s = "".join(
        ch for ch in s if not ch.isspace() and not unicodedata.category(ch).startswith("P")
    )
    return unicodedata.normalize("NFC", s.lower())


@dataclass(frozen=True)
class CorpusEntry:
    normalized_text: str
    source_title: str
    themes: frozenset[str]


@dataclass(frozen=True)
class VerseCorpus:
    """Validated verse collection, keyed by normalized text."""

    entries: dict[str, CorpusEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, normalized: str) -> CorpusEntry | None:
        return self.entries.get(normalized)


class CorpusError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def load_corpus(document: str | bytes) -> VerseCorpus:
    """Parse the corpus file format: one entry per line,
    ``verse<TAB>source_title<TAB>comma-separated-themes`` with the last
    two fields optional.  Lines starting with ``#`` are comments.

    Duplicate verses (after normalization) collapse into one entry with
    the union of their theme tags.  Raises CorpusError with the offending
    line number.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    entries: dict[str, CorpusEntry] = {}
    for line_no, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) > 3:
            raise CorpusError(line_no, f"expected at most 3 tab-separated fields, got {len(parts)}")
        verse = parts[0].strip()
        title = parts[1].strip() if len(parts) > 1 else ""
        themes = frozenset(
            t.strip().lower() for t in parts[2].split(",") if t.strip()
        ) if len(parts) > 2 else frozenset()
        normalized = normalize_verse(verse)
        if not normalized:
            raise CorpusError(line_no, "verse is empty after normalization")
        prev = entries.get(normalized)
        if prev is not None:
            entries[normalized] = CorpusEntry(normalized, prev.source_title, prev.themes | themes)
        else:
            entries[normalized] = CorpusEntry(normalized, title, themes)
    return VerseCorpus(entries)


class RoundMode(str, Enum):
    KEYWORD = "keyword"
    THEME = "theme"


class WinEffect(str, Enum):
    PETAL_FIELD = "petal_field"
    FIREWORK_VOLLEY = "firework_volley"


DEFAULT_ROUND_DURATION_MS = 300_000


@dataclass(frozen=True)
class RoundSpec:
    mode: RoundMode
    value: str  # the keyword itself, or the theme tag
    win_effect: WinEffect
    duration_ms: int = DEFAULT_ROUND_DURATION_MS
    threshold: int = 20

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if self.threshold < 1:
            raise ValueError("threshold must be at least 1")


class JudgmentResult(str, Enum):
    ACCEPTED = "Accepted"
    DUPLICATE = "Duplicate"
    NOT_IN_CORPUS = "NotInCorpus"
    KEYWORD_MISS = "KeywordMiss"
    THEME_MISS = "ThemeMiss"
    NO_ACTIVE_ROUND = "NoActiveRound"


class Outcome(str, Enum):
    RUNNING = "running"
    WON = "won"
    LOST = "lost"


class RoundAlreadyActive(RuntimeError):
    pass


BOARD_SIZE = 9


@dataclass
class BoardView:
    """Immutable projection of a round for the on-screen game board."""

    mode: RoundMode
    value: str
    last_nine: list[str]
    countdown_ms: int
    combo: int
    progress: tuple[int, int]
    outcome: Outcome

    def to_json(self) -> dict:
        return {
            "mode": self.mode.value,
            "value": self.value,
            "last_nine": list(self.last_nine),
            "countdown_ms": self.countdown_ms,
            "combo": self.combo,
            "progress": {"count": self.progress[0], "threshold": self.progress[1]},
            "outcome": self.outcome.value,
        }


@dataclass
class VerseRound:
    """State of one round.  Mutated only by the simulation sequencer."""

    spec: RoundSpec
    started_at_ms: int
    accepted: dict[str, str] = field(default_factory=dict)  # normalized -> display text
    combo: int = 0
    outcome: Outcome = Outcome.RUNNING
    won_at_ms: int | None = None

    def _expired(self, now_ms: int) -> bool:
        return now_ms - self.started_at_ms >= self.spec.duration_ms

    def submit(self, corpus: VerseCorpus, text: str, now_ms: int) -> JudgmentResult:
        """Judge one chat line.  Accepted verses append to the set and
        extend the combo; any rejection resets the combo.  Reaching the
        threshold flips the outcome to WON."""
        if self.outcome is not Outcome.RUNNING or self._expired(now_ms):
            return JudgmentResult.NO_ACTIVE_ROUND

        normalized = normalize_verse(text)
        entry = corpus.lookup(normalized)
        if entry is None:
            self.combo = 0
            return JudgmentResult.NOT_IN_CORPUS
        if self.spec.mode is RoundMode.KEYWORD:
            if normalize_verse(self.spec.value) not in normalized:
                self.combo = 0
                return JudgmentResult.KEYWORD_MISS
        else:
            if self.spec.value.strip().lower() not in entry.themes:
                self.combo = 0
                return JudgmentResult.THEME_MISS
        if normalized in self.accepted:
            self.combo = 0
            return JudgmentResult.DUPLICATE

        self.accepted[normalized] = text.strip()
        self.combo += 1
        if len(self.accepted) >= self.spec.threshold:
            self.outcome = Outcome.WON
            self.won_at_ms = now_ms
        return JudgmentResult.ACCEPTED

    def tick(self, now_ms: int) -> None:
        """Expire a running round whose window has closed.  Terminal
        states are left untouched."""
        if self.outcome is Outcome.RUNNING and self._expired(now_ms):
            self.outcome = Outcome.LOST

    def board_view(self, now_ms: int) -> BoardView:
        if self.outcome is Outcome.WON and self.won_at_ms is not None:
            remaining = self.spec.duration_ms - (self.won_at_ms - self.started_at_ms)
        elif self.outcome is Outcome.LOST:
            remaining = 0
        else:
            remaining = self.spec.duration_ms - (now_ms - self.started_at_ms)
        display = list(self.accepted.values())
        return BoardView(
            mode=self.spec.mode,
            value=self.spec.value,
            last_nine=display[-BOARD_SIZE:],
            countdown_ms=max(0, remaining),
            combo=self.combo,
            progress=(len(self.accepted), self.spec.threshold),
            outcome=self.outcome,
        )


def start_round(spec: RoundSpec, now_ms: int, current: VerseRound | None = None) -> VerseRound:
    """Begin a round at `now_ms`.  Raises RoundAlreadyActive if `current`
    is still running."""
    if current is not None and current.outcome is Outcome.RUNNING and not current._expired(now_ms):
        raise RoundAlreadyActive("a round is already running")
    return VerseRound(spec=spec, started_at_ms=now_ms)
