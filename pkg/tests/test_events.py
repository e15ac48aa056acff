from __future__ import annotations

import json
import random
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arsls.events import (
    Command,
    CommandKind,
    CommandTable,
    DecodeError,
    DecodeErrorKind,
    EventKind,
    RoomEvent,
    decode_event,
    encode_event,
    parse_command,
    sort_events,
)


class TestDecode:
    def test_chat_event_field_mapping(self):
        event = decode_event('{"kind":"chat","user_id":"u1","display_name":"Ann","ts_ms":0,"text":"feed fish"}')
        assert event == RoomEvent(EventKind.CHAT, "u1", "Ann", 0, text="feed fish")

    def test_gift_event_boundary_amount(self):
        event = decode_event('{"kind":"gift","user_id":"u2","display_name":"Bo","ts_ms":500,"amount_cny":"9.99"}')
        assert isinstance(event, RoomEvent)
        assert event.amount_cny == Decimal("9.99")
        assert event.text is None

    def test_negative_timestamp(self):
        err = decode_event('{"kind":"gift","user_id":"u3","ts_ms":-4}')
        assert isinstance(err, DecodeError)
        assert err.kind is DecodeErrorKind.BAD_TIMESTAMP

    def test_unknown_extra_fields_ignored(self):
        event = decode_event(
            '{"kind":"chat","user_id":"u1","display_name":"Ann","ts_ms":1,"text":"hi","platform":"x","room":"y"}'
        )
        assert isinstance(event, RoomEvent)

    @pytest.mark.parametrize(
        "line,expected",
        [
            ("not json at all", DecodeErrorKind.MALFORMED),
            ("[1,2,3]", DecodeErrorKind.MALFORMED),
            ('{"kind":"dance","user_id":"u","display_name":"n","ts_ms":1}', DecodeErrorKind.MALFORMED),
            ('{"user_id":"u","display_name":"n","ts_ms":1,"text":"x"}', DecodeErrorKind.MISSING_FIELD),
            ('{"kind":"chat","display_name":"n","ts_ms":1,"text":"x"}', DecodeErrorKind.MISSING_FIELD),
            ('{"kind":"chat","user_id":"u","display_name":"n","text":"x"}', DecodeErrorKind.MISSING_FIELD),
            ('{"kind":"chat","user_id":"u","display_name":"n","ts_ms":1}', DecodeErrorKind.MISSING_FIELD),
            ('{"kind":"chat","user_id":"u","display_name":"n","ts_ms":1.5,"text":"x"}', DecodeErrorKind.BAD_TIMESTAMP),
            ('{"kind":"gift","user_id":"u","display_name":"n","ts_ms":1,"amount_cny":"-0.01"}', DecodeErrorKind.NEGATIVE_AMOUNT),
            ('{"kind":"gift","user_id":"u","display_name":"n","ts_ms":1,"amount_cny":"1.999"}', DecodeErrorKind.MALFORMED),
            ('{"kind":"gift","user_id":"u","display_name":"n","ts_ms":1,"amount_cny":9.99}', DecodeErrorKind.MALFORMED),
            ('{"kind":"chat","user_id":"u","display_name":"n","ts_ms":1,"text":"x","amount_cny":"1.00"}', DecodeErrorKind.MALFORMED),
        ],
    )
    def test_error_taxonomy(self, line, expected):
        err = decode_event(line)
        assert isinstance(err, DecodeError)
        assert err.kind is expected

    def test_decode_never_raises_on_garbage(self):
        rng = random.Random(7)
        for _ in range(500):
            blob = bytes(rng.randrange(256) for _ in range(rng.randrange(80)))
            result = decode_event(blob)
            assert isinstance(result, (RoomEvent, DecodeError))


_events = st.one_of(
    st.builds(
        RoomEvent,
        kind=st.just(EventKind.CHAT),
        user_id=st.text(min_size=1, max_size=8),
        display_name=st.text(max_size=12),
        ts_ms=st.integers(min_value=0, max_value=10**9),
        text=st.text(max_size=40),
    ),
    st.builds(
        RoomEvent,
        kind=st.just(EventKind.GIFT),
        user_id=st.text(min_size=1, max_size=8),
        display_name=st.text(max_size=12),
        ts_ms=st.integers(min_value=0, max_value=10**9),
        amount_cny=st.decimals(min_value=0, max_value=10000, places=2),
    ),
)


class TestRoundTrip:
    @given(_events)
    @settings(max_examples=300)
    def test_decode_encode_round_trip(self, event):
        assert decode_event(encode_event(event)) == event

    def test_wire_amounts_are_strings(self):
        line = encode_event(RoomEvent(EventKind.GIFT, "u", "n", 3, amount_cny=Decimal("10.00")))
        assert json.loads(line)["amount_cny"] == "10.00"


class TestParseCommand:
    @pytest.mark.parametrize(
        "text,kind",
        [
            ("release my lotus", CommandKind.RELEASE_LOTUS),
            ("dash my lotus", CommandKind.DASH_LOTUS),
            ("feed fish", CommandKind.FEED_FISH),
        ],
    )
    def test_paper_trigger_phrases(self, text, kind):
        assert parse_command(text).kind is kind

    def test_case_and_whitespace_normalization(self):
        # Oracle: apply the stated normalization, then exact match.
        raw = "  FEED FISH  "
        assert raw.strip().casefold() == "feed fish"
        assert parse_command(raw).kind is CommandKind.FEED_FISH

    def test_story_hashtag_anywhere(self):
        cmd = parse_command("#MyStory missing West Lake since 2019")
        assert cmd == Command(CommandKind.STORY, "missing West Lake since 2019")
        tail = parse_command("missing it #MyStory so much")
        assert tail == Command(CommandKind.STORY, "missing it so much")

    def test_story_hashtag_alone_is_plain(self):
        assert parse_command("#MyStory").kind is CommandKind.PLAIN
        assert parse_command("  #mystory  ").kind is CommandKind.PLAIN

    def test_plain_catch_all(self):
        assert parse_command("nice view!") == Command(CommandKind.PLAIN, "nice view!")

    def test_trigger_must_be_whole_comment(self):
        assert parse_command("please release my lotus").kind is CommandKind.PLAIN
        assert parse_command("feed fish now").kind is CommandKind.PLAIN

    def test_synonym_table(self):
        table = CommandTable().with_synonyms({"release_lotus": ["放荷花"], "feed_fish": ["喂鱼"]})
        assert parse_command("放荷花", table).kind is CommandKind.RELEASE_LOTUS
        assert parse_command("喂鱼 ", table).kind is CommandKind.FEED_FISH
        assert parse_command("放荷花").kind is CommandKind.PLAIN  # default table unaffected

    @given(st.text(max_size=60))
    @settings(max_examples=500)
    def test_totality(self, text):
        cmd = parse_command(text)
        assert cmd.kind in CommandKind


class TestOrdering:
    def test_sorted_by_ts_then_arrival(self):
        rng = random.Random(3)
        events = []
        for i in range(200):
            events.append((RoomEvent(EventKind.CHAT, "u", "n", rng.randrange(20), text="x"), i))
        ordered = sort_events(events)
        keys = [(e.ts_ms, i) for e, i in ordered]
        assert keys == sorted(keys)
        # stability among equal timestamps
        for (e1, i1), (e2, i2) in zip(ordered, ordered[1:]):
            if e1.ts_ms == e2.ts_ms:
                assert i1 < i2
