"""Wire format of incoming room events and the chat command grammar.

Every input to the engine is a RoomEvent: a timestamped chat line or gift
from a named user, arriving as one JSON object per line.  Chat text is
parsed into a small command grammar (release/dash lotus, feed fish,
#MyStory, or plain chat).  Decoding and parsing are pure and total; bad
input yields a DecodeError value, never an exception that could take down
a live room.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum


class EventKind(str, Enum):
    CHAT = "chat"
    GIFT = "gift"


@dataclass(frozen=True)
class RoomEvent:
    """One chat or gift action by a user, in session-relative time."""

    kind: EventKind
    user_id: str
    display_name: str
    ts_ms: int
    text: str | None = None
    amount_cny: Decimal | None = None


class DecodeErrorKind(str, Enum):
    MALFORMED = "Malformed"
    MISSING_FIELD = "MissingField"
    BAD_TIMESTAMP = "BadTimestamp"
    NEGATIVE_AMOUNT = "NegativeAmount"


@dataclass(frozen=True)
class DecodeError:
    kind: DecodeErrorKind
    detail: str = ""


class CommandKind(str, Enum):
    RELEASE_LOTUS = "release_lotus"
    DASH_LOTUS = "dash_lotus"
    FEED_FISH = "feed_fish"
    STORY = "story"
    PLAIN = "plain"


@dataclass(frozen=True)
class Command:
    """Parsed intent of one chat line.  `text` carries the story for
    STORY and the original comment for PLAIN; it is None otherwise."""

    kind: CommandKind
    text: str | None = None


@dataclass(frozen=True)
class CommandTable:
    """Trigger phrases per command, matched case-insensitively against the
    whole trimmed comment.  Deployments add localized synonyms here; the
    defaults are the English phrases the feature set was designed around.
    """

    release_lotus: tuple[str, ...] = ("release my lotus",)
    dash_lotus: tuple[str, ...] = ("dash my lotus",)
    feed_fish: tuple[str, ...] = ("feed fish",)
    story_hashtag: str = "#MyStory"

    def with_synonyms(self, synonyms: dict[str, list[str]]) -> CommandTable:
        """Return a table extended with extra trigger phrases, keyed by
        command name ("release_lotus", "dash_lotus", "feed_fish")."""
        return CommandTable(
            release_lotus=self.release_lotus + tuple(synonyms.get("release_lotus", [])),
            dash_lotus=self.dash_lotus + tuple(synonyms.get("dash_lotus", [])),
            feed_fish=self.feed_fish + tuple(synonyms.get("feed_fish", [])),
            story_hashtag=self.story_hashtag,
        )


DEFAULT_COMMANDS = CommandTable()

_MAX_AMOUNT_EXPONENT = -2  # at most two fraction digits on the wire


def _decode_amount(raw: object) -> Decimal | DecodeError:
    if not isinstance(raw, str):
        return DecodeError(DecodeErrorKind.MALFORMED, "amount_cny must be a decimal string")
    try:
        amount = Decimal(raw)
    except InvalidOperation:
        return DecodeError(DecodeErrorKind.MALFORMED, f"bad decimal {raw!r}")
    if not amount.is_finite():
        return DecodeError(DecodeErrorKind.MALFORMED, f"non-finite amount {raw!r}")
    if amount.as_tuple().exponent < _MAX_AMOUNT_EXPONENT:
        return DecodeError(DecodeErrorKind.MALFORMED, f"more than 2 fraction digits in {raw!r}")
    if amount < 0:
        return DecodeError(DecodeErrorKind.NEGATIVE_AMOUNT, raw)
    return amount.quantize(Decimal("0.01"))


def decode_event(line: str | bytes) -> RoomEvent | DecodeError:
    """Decode one newline-delimited wire message into a RoomEvent.

    Unknown extra fields are ignored.  Returns a DecodeError value on any
    problem; callers drop the event and count it.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            return DecodeError(DecodeErrorKind.MALFORMED, "invalid utf-8")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        return DecodeError(DecodeErrorKind.MALFORMED, f"bad json: {exc.msg}")
    if not isinstance(obj, dict):
        return DecodeError(DecodeErrorKind.MALFORMED, "not a json object")

    kind_raw = obj.get("kind")
    if kind_raw is None:
        return DecodeError(DecodeErrorKind.MISSING_FIELD, "kind")
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        return DecodeError(DecodeErrorKind.MALFORMED, f"unknown kind {kind_raw!r}")

    user_id = obj.get("user_id")
    if user_id is None:
        return DecodeError(DecodeErrorKind.MISSING_FIELD, "user_id")
    if not isinstance(user_id, str) or not user_id:
        return DecodeError(DecodeErrorKind.MALFORMED, "user_id must be a non-empty string")

    # Timestamp problems outrank missing optional-per-kind fields so a bad
    # clock is reported as such, not as a field complaint.
    ts_raw = obj.get("ts_ms")
    if ts_raw is None:
        return DecodeError(DecodeErrorKind.MISSING_FIELD, "ts_ms")
    if isinstance(ts_raw, bool) or not isinstance(ts_raw, int):
        return DecodeError(DecodeErrorKind.BAD_TIMESTAMP, f"ts_ms {ts_raw!r} is not an integer")
    if ts_raw < 0:
        return DecodeError(DecodeErrorKind.BAD_TIMESTAMP, f"ts_ms {ts_raw} is negative")

    display_name = obj.get("display_name")
    if display_name is None:
        return DecodeError(DecodeErrorKind.MISSING_FIELD, "display_name")
    if not isinstance(display_name, str):
        return DecodeError(DecodeErrorKind.MALFORMED, "display_name must be a string")

    if kind is EventKind.CHAT:
        if "amount_cny" in obj:
            return DecodeError(DecodeErrorKind.MALFORMED, "chat event carries amount_cny")
        text = obj.get("text")
        if text is None:
            return DecodeError(DecodeErrorKind.MISSING_FIELD, "text")
        if not isinstance(text, str):
            return DecodeError(DecodeErrorKind.MALFORMED, "text must be a string")
        return RoomEvent(kind, user_id, display_name, ts_raw, text=text)

    if "text" in obj:
        return DecodeError(DecodeErrorKind.MALFORMED, "gift event carries text")
    if "amount_cny" not in obj:
        return DecodeError(DecodeErrorKind.MISSING_FIELD, "amount_cny")
    amount = _decode_amount(obj["amount_cny"])
    if isinstance(amount, DecodeError):
        return amount
    return RoomEvent(kind, user_id, display_name, ts_raw, amount_cny=amount)


def encode_event(event: RoomEvent) -> str:
    """Serialize a RoomEvent to its one-line wire form (no newline)."""
    obj: dict[str, object] = {
        "kind": event.kind.value,
        "user_id": event.user_id,
        "display_name": event.display_name,
        "ts_ms": event.ts_ms,
    }
    if event.kind is EventKind.CHAT:
        obj["text"] = event.text
    else:
        obj["amount_cny"] = str(event.amount_cny)
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_command(text: str, table: CommandTable = DEFAULT_COMMANDS) -> Command:
    """Map one chat line to exactly one Command.

    Trigger phrases must constitute the entire comment (after trimming,
    case-insensitively) so a verse quoting "feed fish" is not hijacked.
    The story hashtag may sit anywhere in the comment; the story is the
    comment with the hashtag removed and trimmed.  Everything else is
    plain chat.
    """
    trimmed = text.strip()
    folded = trimmed.casefold()
    if folded in (t.casefold() for t in table.release_lotus):
        return Command(CommandKind.RELEASE_LOTUS)
    if folded in (t.casefold() for t in table.dash_lotus):
        return Command(CommandKind.DASH_LOTUS)
    if folded in (t.casefold() for t in table.feed_fish):
        return Command(CommandKind.FEED_FISH)

    tag = table.story_hashtag.casefold()
    if tag in folded:
        # Strip every occurrence (case-insensitively) together with one
        # adjacent whitespace run, so stories keep natural spacing.
        out = []
        i = 0
        while i < len(trimmed):
            if trimmed[i : i + len(tag)].casefold() == tag:
                i += len(tag)
                while i < len(trimmed) and trimmed[i].isspace():
                    i += 1
            else:
                out.append(trimmed[i])
                i += 1
        story = "".join(out).strip()
        if story:
            return Command(CommandKind.STORY, text=story)
    return Command(CommandKind.PLAIN, text=text)


def sort_events(events: list[tuple[RoomEvent, int]]) -> list[tuple[RoomEvent, int]]:
    """Order (event, arrival_index) pairs the way the sequencer consumes
    them: by timestamp, ties broken by arrival."""
    return sorted(events, key=lambda pair: (pair[0].ts_ms, pair[1]))
