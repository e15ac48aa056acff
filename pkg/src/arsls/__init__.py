"""Deterministic engine for augmented-reality scenic live-streaming rooms.

Chat and gift events from viewers drive interactive overlays on a
fixed-camera scene: a collaborative verse game, drifting lotuses, jumping
fish, fireworks, and story umbrellas.  The whole simulation is a pure
function of (seed, scene, ordered event stream), so any live session can
be replayed bit-for-bit from its recording.
"""

__version__ = "0.1.0"

from arsls.events import Command, CommandKind, DecodeError, RoomEvent, parse_command
from arsls.scene import SceneConfig, load_scene
from arsls.verse import VerseCorpus, load_corpus

__all__ = [
    "Command",
    "CommandKind",
    "DecodeError",
    "RoomEvent",
    "SceneConfig",
    "VerseCorpus",
    "load_corpus",
    "load_scene",
    "parse_command",
]
