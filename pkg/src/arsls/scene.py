"""Static reconstruction of the fixed-camera scene.

Because the camera never moves, the scene reduces to 2.5-D screen-space
geometry: a water polygon where floating entities live, occluder polygons
with a constant depth each (they show the real background but hide
virtual objects behind them), a far-end segment where fireworks launch,
and a spawn disk for lotuses.  Coordinates are pixels, origin top-left,
y downward.

Depth for entities is -y: larger y is nearer the camera.  Renderers draw
back-to-front by decreasing depth value, so smaller y draws first.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum


@dataclass(frozen=True)
class Point:
    x: float
    y: float


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point

    def lerp(self, t: float) -> Point:
        return Point(self.a.x + (self.b.x - self.a.x) * t, self.a.y + (self.b.y - self.a.y) * t)


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.vertices)

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p.x for p in self.vertices]
        ys = [p.y for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)


class SceneError(ValueError):
    """Raised by load_scene with the offending field path in the message."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    if _orient(a, b, p) != 0:
        return False
    return min(a.x, b.x) <= p.x <= max(a.x, b.x) and min(a.y, b.y) <= p.y <= max(a.y, b.y)


def _segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    """Proper or improper intersection of closed segments ab and cd."""
    d1 = _orient(c, d, a)
    d2 = _orient(c, d, b)
    d3 = _orient(a, b, c)
    d4 = _orient(a, b, d)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    return (
        _on_segment(c, d, a)
        or _on_segment(c, d, b)
        or _on_segment(a, b, c)
        or _on_segment(a, b, d)
    )


def polygon_is_simple(poly: Polygon) -> bool:
    """Pairwise edge check; adjacent edges may share only their common
    endpoint.  Quadratic, fine at scene-config scale."""
    n = len(poly.vertices)
    if n < 3:
        return False
    edges = [(poly.vertices[i], poly.vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        if a == b:
            return False
        for j in range(i + 1, n):
            c, d = edges[j]
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                shared = b if j == i + 1 else a
                # The only allowed contact is the shared vertex itself.
                other_hits = (
                    _on_segment(c, d, a) and a != shared,
                    _on_segment(c, d, b) and b != shared,
                    _on_segment(a, b, c) and c != shared,
                    _on_segment(a, b, d) and d != shared,
                )
                if any(other_hits):
                    return False
            elif _segments_cross(a, b, c, d):
                return False
    return True


def point_in_polygon(poly: Polygon, p: Point) -> bool:
    """Even-odd rule; points on the boundary count as inside."""
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        if _on_segment(verts[i], verts[(i + 1) % n], p):
            return True
    inside = False
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if p.x < x_cross:
                inside = not inside
    return inside


@dataclass(frozen=True)
class Occluder:
    polygon: Polygon
    depth: float


@dataclass(frozen=True)
class SpawnDisk:
    center: Point
    radius: float


# Single-valued on purpose: the petal field, once unlocked, never expires.
class PetalLifetime(str, Enum):
    LASTING = "lasting"


@dataclass(frozen=True)
class TuningConstants:
    lotus_drift_px_s: float = 12.0
    lotus_dash_multiplier: float = 6.0
    dash_duration_ms: int = 1500
    ripple_period_ms: int = 800
    ripple_lifetime_ms: int = 1200
    fish_jump_duration_ms: int = 1000
    umbrella_ascent_px_s: float = 30.0
    firework_flight_ms: int = 1400
    petal_field_lifetime: PetalLifetime = PetalLifetime.LASTING
    tick_hz: int = 30

    def __post_init__(self) -> None:
        for name in (
            "lotus_drift_px_s",
            "lotus_dash_multiplier",
            "dash_duration_ms",
            "ripple_period_ms",
            "ripple_lifetime_ms",
            "fish_jump_duration_ms",
            "umbrella_ascent_px_s",
            "firework_flight_ms",
            "tick_hz",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"tuning.{name} must be strictly positive")

    @property
    def dt_ms(self) -> float:
        return 1000.0 / self.tick_hz


@dataclass(frozen=True)
class SceneConfig:
    width_px: int
    height_px: int
    background_ref: str
    water: Polygon
    occluders: tuple[Occluder, ...]
    firework_spawn: Segment
    lotus_spawn: SpawnDisk
    tuning: TuningConstants = field(default_factory=TuningConstants)

    def point_in_water(self, p: Point) -> bool:
        return point_in_polygon(self.water, p)

    @staticmethod
    def depth_of(p: Point) -> float:
        """Scene depth at a screen point: -y, so larger y (lower on
        screen) is nearer the camera."""
        return -p.y


def _parse_point(raw: object, path: str) -> Point:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in raw)
    ):
        raise SceneError(path, f"expected [x, y] pair, got {raw!r}")
    return Point(float(raw[0]), float(raw[1]))


def _parse_polygon(raw: object, path: str) -> Polygon:
    if not isinstance(raw, list):
        raise SceneError(path, "expected an array of [x, y] pairs")
    return Polygon(tuple(_parse_point(v, f"{path}[{i}]") for i, v in enumerate(raw)))


_SPAWN_PROBE_COUNT = 256


def _validate_spawn_in_water(cfg_water: Polygon, disk: SpawnDisk) -> None:
    # Deterministic probe: sample the disk and demand every point in water.
    probe = random.Random(0x5CE4E)
    for _ in range(_SPAWN_PROBE_COUNT):
        r = disk.radius * math.sqrt(probe.random())
        theta = probe.random() * 2 * math.pi
        p = Point(disk.center.x + r * math.cos(theta), disk.center.y + r * math.sin(theta))
        if not point_in_polygon(cfg_water, p):
            raise SceneError("lotus_spawn", f"spawn disk leaves the water polygon near ({p.x:.1f}, {p.y:.1f})")


def load_scene(document: str | bytes) -> SceneConfig:
    """Parse and validate a scene-config JSON document.

    Raises SceneError naming the offending field on any invariant
    violation.  Loading is pure: the same bytes always produce an equal
    config.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneError("$", f"bad json: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SceneError("$", "top level must be an object")

    screen = obj.get("screen")
    if not isinstance(screen, dict):
        raise SceneError("screen", "missing or not an object")
    width = screen.get("width_px")
    height = screen.get("height_px")
    if not isinstance(width, int) or width <= 0:
        raise SceneError("screen.width_px", "must be a positive integer")
    if not isinstance(height, int) or height <= 0:
        raise SceneError("screen.height_px", "must be a positive integer")

    background_ref = obj.get("background_ref", "")
    if not isinstance(background_ref, str):
        raise SceneError("background_ref", "must be a path string")

    water = _parse_polygon(obj.get("water"), "water")
    if len(water) < 3:
        raise SceneError("water", "needs at least 3 vertices")
    if not polygon_is_simple(water):
        raise SceneError("water", "not simple")

    occluders = []
    raw_occluders = obj.get("occluders", [])
    if not isinstance(raw_occluders, list):
        raise SceneError("occluders", "expected an array")
    for i, raw in enumerate(raw_occluders):
        if not isinstance(raw, dict):
            raise SceneError(f"occluders[{i}]", "expected an object")
        poly = _parse_polygon(raw.get("polygon"), f"occluders[{i}].polygon")
        if len(poly) < 3:
            raise SceneError(f"occluders[{i}].polygon", "needs at least 3 vertices")
        depth = raw.get("depth")
        if not isinstance(depth, (int, float)) or not math.isfinite(depth):
            raise SceneError(f"occluders[{i}].depth", "must be a finite number")
        occluders.append(Occluder(poly, float(depth)))

    raw_spawn = obj.get("firework_spawn")
    if not isinstance(raw_spawn, list) or len(raw_spawn) != 2:
        raise SceneError("firework_spawn", "expected [[x,y],[x,y]]")
    firework_spawn = Segment(
        _parse_point(raw_spawn[0], "firework_spawn[0]"),
        _parse_point(raw_spawn[1], "firework_spawn[1]"),
    )

    raw_lotus = obj.get("lotus_spawn")
    if not isinstance(raw_lotus, dict):
        raise SceneError("lotus_spawn", "expected {center: [x,y], radius: r}")
    center = _parse_point(raw_lotus.get("center"), "lotus_spawn.center")
    radius = raw_lotus.get("radius")
    if not isinstance(radius, (int, float)) or not math.isfinite(radius) or radius <= 0:
        raise SceneError("lotus_spawn.radius", "must be a positive number")
    lotus_spawn = SpawnDisk(center, float(radius))

    tuning_raw = obj.get("tuning", {})
    if not isinstance(tuning_raw, dict):
        raise SceneError("tuning", "expected an object")
    kwargs = {}
    for fname, ftype in (
        ("lotus_drift_px_s", float),
        ("lotus_dash_multiplier", float),
        ("dash_duration_ms", int),
        ("ripple_period_ms", int),
        ("ripple_lifetime_ms", int),
        ("fish_jump_duration_ms", int),
        ("umbrella_ascent_px_s", float),
        ("firework_flight_ms", int),
        ("tick_hz", int),
    ):
        if fname in tuning_raw:
            value = tuning_raw[fname]
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise SceneError(f"tuning.{fname}", "must be a finite number")
            kwargs[fname] = ftype(value)
    if "petal_field_lifetime" in tuning_raw:
        try:
            kwargs["petal_field_lifetime"] = PetalLifetime(tuning_raw["petal_field_lifetime"])
        except ValueError:
            raise SceneError("tuning.petal_field_lifetime", "only 'lasting' is supported") from None
    try:
        tuning = TuningConstants(**kwargs)
    except ValueError as exc:
        raise SceneError("tuning", str(exc)) from exc

    cfg = SceneConfig(
        width_px=width,
        height_px=height,
        background_ref=background_ref,
        water=water,
        occluders=tuple(occluders),
        firework_spawn=firework_spawn,
        lotus_spawn=lotus_spawn,
        tuning=tuning,
    )
    _validate_spawn_in_water(water, lotus_spawn)
    return cfg


def scene_to_json(cfg: SceneConfig) -> dict:
    """Plain-dict form of a config, matching the file schema (used by the
    HTTP scene endpoint)."""
    return {
        "screen": {"width_px": cfg.width_px, "height_px": cfg.height_px},
        "background_ref": cfg.background_ref,
        "water": [[p.x, p.y] for p in cfg.water.vertices],
        "occluders": [
            {"polygon": [[p.x, p.y] for p in occ.polygon.vertices], "depth": occ.depth}
            for occ in cfg.occluders
        ],
        "firework_spawn": [
            [cfg.firework_spawn.a.x, cfg.firework_spawn.a.y],
            [cfg.firework_spawn.b.x, cfg.firework_spawn.b.y],
        ],
        "lotus_spawn": {
            "center": [cfg.lotus_spawn.center.x, cfg.lotus_spawn.center.y],
            "radius": cfg.lotus_spawn.radius,
        },
        "tuning": {
            "lotus_drift_px_s": cfg.tuning.lotus_drift_px_s,
            "lotus_dash_multiplier": cfg.tuning.lotus_dash_multiplier,
            "dash_duration_ms": cfg.tuning.dash_duration_ms,
            "ripple_period_ms": cfg.tuning.ripple_period_ms,
            "ripple_lifetime_ms": cfg.tuning.ripple_lifetime_ms,
            "fish_jump_duration_ms": cfg.tuning.fish_jump_duration_ms,
            "umbrella_ascent_px_s": cfg.tuning.umbrella_ascent_px_s,
            "firework_flight_ms": cfg.tuning.firework_flight_ms,
            "petal_field_lifetime": cfg.tuning.petal_field_lifetime.value,
            "tick_hz": cfg.tuning.tick_hz,
        },
    }
