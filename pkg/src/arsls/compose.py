"""Turns a simulation snapshot into draw commands and raster frames.

The render list is the client's sole drawing input: depth-sorted commands
with placeholder sprite ids, labels, and opacity.  The rasterizer is the
testing oracle for occlusion: painter's algorithm over the sorted list,
then every occluder polygon re-stamps background over pixels whose
topmost entity lies behind it (transparent-occluder semantics — the
occluder shows the real scene, not a color).

Sprites are solid placeholder shapes; real art lives in UI clients.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from arsls.scene import Point, Polygon, SceneConfig
from arsls.sim import (
    FIREWORK_BURST_MS,
    LOTUS_HALF_PX,
    SimState,
    UMBRELLA_HALF_PX,
    firework_render_pos,
    fish_render_pos,
)
from arsls.verse import BoardView

Z_BACKGROUND = 1e12
Z_UI = -1e12

PETAL_COUNT = 40

_SPRITE_COLORS: dict[str, tuple[int, int, int, int]] = {
    "lotus": (238, 130, 180, 255),
    "lotus_pad": (46, 140, 90, 255),
    "ripple": (220, 240, 255, 255),
    "fish": (255, 140, 60, 255),
    "firework_shell": (255, 230, 120, 255),
    "firework_spark": (255, 180, 60, 255),
    "umbrella": (196, 80, 70, 255),
    "petal": (255, 182, 203, 255),
    "board": (20, 26, 40, 255),
    "board_text": (235, 235, 235, 255),
    "label": (15, 15, 20, 255),
    "label_text": (240, 240, 240, 255),
}

_FISH_PALETTE = [(255, 140, 60, 255), (250, 250, 250, 255), (230, 60, 50, 255), (255, 200, 90, 255)]
_UMBRELLA_PALETTE = [
    (196, 80, 70, 255), (90, 120, 200, 255), (110, 170, 90, 255),
    (210, 170, 80, 255), (150, 90, 170, 255), (80, 170, 170, 255),
]


@dataclass(frozen=True)
class DrawCommand:
    sprite_id: str
    x: float
    y: float
    z_order: float
    scale: float = 1.0
    label: str | None = None
    opacity: float = 1.0
    user_id: str | None = None
    key: int = 0  # depth tie-break; entity id or board line index

    def to_json(self) -> dict:
        obj: dict = {
            "sprite": self.sprite_id,
            "x": round(self.x, 2),
            "y": round(self.y, 2),
            "z": self.z_order,
            "scale": self.scale,
            "opacity": round(self.opacity, 3),
        }
        if self.label is not None:
            obj["label"] = self.label
        if self.user_id is not None:
            obj["user_id"] = self.user_id
        return obj


@dataclass
class RenderList:
    commands: list[DrawCommand] = field(default_factory=list)

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self.commands]


def _petal_positions(now_ms: float, cfg: SceneConfig) -> list[tuple[float, float]]:
    """Pure function of time: drifting petals, no RNG state touched."""
    t = now_ms / 1000.0
    out = []
    for i in range(PETAL_COUNT):
        speed = 28.0 + (i % 7) * 6.0
        x = (i * 73.856 + 22.0 * math.sin(t * 0.8 + i * 1.7)) % cfg.width_px
        y = (i * 37.31 + t * speed) % cfg.height_px
        out.append((x, y))
    return out


def build_render_list(state: SimState, cfg: SceneConfig, board: BoardView | None = None) -> RenderList:
    """Depth-sorted draw commands for every live entity and effect.

    Pure with respect to `state`: no RNG draws, no mutation, so calling
    it any number of times cannot perturb the simulation.
    """
    now = state.now_ms
    tuning = cfg.tuning
    cmds: list[DrawCommand] = [
        DrawCommand("background", cfg.width_px / 2, cfg.height_px / 2, Z_BACKGROUND)
    ]

    if state.petal_field:
        for i, (x, y) in enumerate(_petal_positions(now, cfg)):
            cmds.append(DrawCommand("petal", x, y, -y, opacity=0.9, key=i))

    for ripple in state.ripples:
        age = (now - ripple.born_at_ms) / tuning.ripple_lifetime_ms
        age = min(max(age, 0.0), 1.0)
        cmds.append(
            DrawCommand(
                "ripple", ripple.center.x, ripple.center.y, -ripple.center.y + 0.001,
                scale=0.4 + 1.6 * age, opacity=1.0 - age,
            )
        )

    for lotus in state.lotuses.values():
        cmds.append(
            DrawCommand(
                "lotus", lotus.pos.x, lotus.pos.y, -lotus.pos.y,
                label=lotus.owner_name, user_id=lotus.owner_id, key=lotus.entity_id,
            )
        )

    for fish in state.fishes:
        pos = fish_render_pos(fish, now, tuning.fish_jump_duration_ms)
        cmds.append(
            DrawCommand(
                f"fish/{fish.look_id}", pos.x, pos.y, -fish.food_pos.y, key=fish.entity_id
            )
        )

    for fw in state.fireworks:
        if not fw.exploded:
            pos = firework_render_pos(fw, now)
            cmds.append(
                DrawCommand(
                    "firework_shell", pos.x, pos.y, -pos.y,
                    label=fw.tipper_name, key=fw.entity_id,
                )
            )
        else:
            age_s = (now - fw.launched_at_ms - fw.flight_ms) / 1000.0
            fade = max(0.0, 1.0 - age_s * 1000.0 / FIREWORK_BURST_MS)
            for j, (angle, speed) in enumerate(fw.particles):
                px = fw.apex.x + math.cos(angle) * speed * age_s
                py = fw.apex.y + math.sin(angle) * speed * age_s
                cmds.append(
                    DrawCommand(
                        "firework_spark", px, py, -fw.apex.y,
                        opacity=fade, key=fw.entity_id * 1000 + j,
                    )
                )
            cmds.append(
                DrawCommand(
                    "firework_shell", fw.apex.x, fw.apex.y, -fw.apex.y,
                    label=fw.tipper_name, opacity=fade, key=fw.entity_id,
                )
            )

    for um in state.umbrellas:
        cmds.append(
            DrawCommand(
                "umbrella/" + str(um.texture_id), um.pos.x, um.pos.y, -um.pos.y,
                label=f"{um.owner_name}: {um.story}", user_id=um.owner_id, key=um.entity_id,
            )
        )

    if board is not None:
        cmds.extend(_board_commands(board))

    cmds.sort(key=lambda c: (-c.z_order, c.key))
    return RenderList(cmds)


def _board_commands(board: BoardView) -> list[DrawCommand]:
    """The game board: a fixed panel on the left with keyword, the last
    nine verses, countdown, combo, and progress."""
    x0, y0 = 16.0, 16.0
    lines = [f"{board.mode.value}: {board.value}"]
    lines.extend(board.last_nine)
    lines.append(f"time {board.countdown_ms // 1000}s  combo {board.combo}")
    lines.append(f"progress {board.progress[0]}/{board.progress[1]}")
    cmds = [DrawCommand("board", x0 + 110, y0 + 10 + 9 * len(lines), Z_UI, key=0)]
    for i, line in enumerate(lines):
        cmds.append(
            DrawCommand("board_text", x0 + 8, y0 + 10 + 18 * i, Z_UI, label=line, key=i + 1)
        )
    return cmds


# ----------------------------------------------------------------------
# rasterization
# ----------------------------------------------------------------------


@dataclass
class Frame:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 4) uint8


class DimMismatch(ValueError):
    pass


def flat_background(cfg: SceneConfig) -> np.ndarray:
    """Deterministic stand-in when no background image is configured:
    a sky gradient with the water polygon tinted."""
    h, w = cfg.height_px, cfg.width_px
    pixels = np.zeros((h, w, 4), dtype=np.uint8)
    rows = np.linspace(0, 1, h)[:, None]
    pixels[..., 0] = (120 + 40 * rows).astype(np.uint8)
    pixels[..., 1] = (150 + 30 * rows).astype(np.uint8)
    pixels[..., 2] = (190 + 20 * rows).astype(np.uint8)
    pixels[..., 3] = 255
    water = _polygon_mask(cfg.water, w, h)
    pixels[water, 0] = 40
    pixels[water, 1] = 90
    pixels[water, 2] = 140
    return pixels


def load_background(cfg: SceneConfig, path: str | None = None) -> np.ndarray:
    """Background pixels from the configured PNG, or the flat stand-in.
    A file with the wrong dimensions raises DimMismatch."""
    ref = path if path is not None else cfg.background_ref
    if not ref or not os.path.exists(ref):
        return flat_background(cfg)
    img = Image.open(ref).convert("RGBA")
    if img.size != (cfg.width_px, cfg.height_px):
        raise DimMismatch(f"background is {img.size}, scene wants {(cfg.width_px, cfg.height_px)}")
    return np.asarray(img, dtype=np.uint8).copy()


def _polygon_mask(poly: Polygon, width: int, height: int) -> np.ndarray:
    """Even-odd polygon coverage of integer pixel centers, vectorized."""
    mask_x0, mask_y0, mask_x1, mask_y1 = poly.bbox()
    x0 = max(int(math.floor(mask_x0)), 0)
    y0 = max(int(math.floor(mask_y0)), 0)
    x1 = min(int(math.ceil(mask_x1)) + 1, width)
    y1 = min(int(math.ceil(mask_y1)) + 1, height)
    mask = np.zeros((height, width), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys = np.arange(y0, y1, dtype=np.float64)[:, None]
    xs = np.arange(x0, x1, dtype=np.float64)[None, :]
    crossings = np.zeros((y1 - y0, x1 - x0), dtype=np.int32)
    verts = poly.vertices
    for i in range(len(verts)):
        a, b = verts[i], verts[(i + 1) % len(verts)]
        if a.y == b.y:
            continue
        straddles = (a.y > ys) != (b.y > ys)
        x_cross = a.x + (ys - a.y) * (b.x - a.x) / (b.y - a.y)
        crossings += (straddles & (xs < x_cross)).astype(np.int32)
    mask[y0:y1, x0:x1] = (crossings % 2) == 1
    return mask


def _disk_mask(width: int, height: int, cx: float, cy: float, r: float) -> np.ndarray:
    x0 = max(int(cx - r) - 1, 0)
    y0 = max(int(cy - r) - 1, 0)
    x1 = min(int(cx + r) + 2, width)
    y1 = min(int(cy + r) + 2, height)
    mask = np.zeros((height, width), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys = np.arange(y0, y1, dtype=np.float64)[:, None]
    xs = np.arange(x0, x1, dtype=np.float64)[None, :]
    mask[y0:y1, x0:x1] = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    return mask


def _ring_mask(width: int, height: int, cx: float, cy: float, r: float, thickness: float) -> np.ndarray:
    outer = _disk_mask(width, height, cx, cy, r)
    inner = _disk_mask(width, height, cx, cy, max(r - thickness, 0.0))
    return outer & ~inner


def _rect_mask(width: int, height: int, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    xa = max(int(x0), 0)
    ya = max(int(y0), 0)
    xb = min(int(x1) + 1, width)
    yb = min(int(y1) + 1, height)
    if xa < xb and ya < yb:
        mask[ya:yb, xa:xb] = True
    return mask


def _triangle_mask(width: int, height: int, cx: float, cy: float, half: float) -> np.ndarray:
    """Upright triangle: apex above centre, base below (umbrella canopy)."""
    x0 = max(int(cx - half) - 1, 0)
    y0 = max(int(cy - half) - 1, 0)
    x1 = min(int(cx + half) + 2, width)
    y1 = min(int(cy + half) + 2, height)
    mask = np.zeros((height, width), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return mask
    ys = np.arange(y0, y1, dtype=np.float64)[:, None]
    xs = np.arange(x0, x1, dtype=np.float64)[None, :]
    rel = (ys - (cy - half)) / (2 * half)  # 0 at apex, 1 at base
    rel = np.clip(rel, 0.0, 1.0)
    mask[y0:y1, x0:x1] = (ys >= cy - half) & (ys <= cy + half) & (np.abs(xs - cx) <= rel * half)
    return mask


_GLYPH_W = 4
_GLYPH_H = 7


def _label_masks(width: int, height: int, cmd: DrawCommand) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic placeholder text: an opaque box above the sprite
    with one pseudo-glyph column pattern per character."""
    text = cmd.label or ""
    box_w = max(len(text) * _GLYPH_W + 4, 8)
    box_h = _GLYPH_H + 4
    bx = cmd.x - box_w / 2
    by = cmd.y - 26 - box_h
    if cmd.sprite_id.startswith("board"):
        bx, by = cmd.x, cmd.y  # board text anchors top-left, not above a sprite
    box = _rect_mask(width, height, bx, by, bx + box_w, by + box_h)
    glyphs = np.zeros((height, width), dtype=bool)
    for i, ch in enumerate(text):
        bits = hash_char(ch)
        gx = int(bx) + 2 + i * _GLYPH_W
        gy = int(by) + 2
        for row in range(_GLYPH_H):
            for col in range(_GLYPH_W - 1):
                if bits >> (row * (_GLYPH_W - 1) + col) & 1:
                    px, py = gx + col, gy + row
                    if 0 <= px < width and 0 <= py < height:
                        glyphs[py, px] = True
    return box, glyphs


def hash_char(ch: str) -> int:
    """Stable 21-bit pattern per character (3 columns x 7 rows)."""
    return int.from_bytes(hashlib.sha256(ch.encode("utf-8")).digest()[:3], "big")


def _blend(pixels: np.ndarray, mask: np.ndarray, color: tuple[int, int, int, int], opacity: float) -> None:
    if not mask.any():
        return
    alpha = (color[3] / 255.0) * opacity
    src = np.array(color[:3], dtype=np.float64)
    region = pixels[mask][:, :3].astype(np.float64)
    pixels[mask, :3] = (src * alpha + region * (1.0 - alpha)).astype(np.uint8)
    pixels[mask, 3] = 255


def _sprite_color(sprite_id: str) -> tuple[int, int, int, int]:
    base, _, variant = sprite_id.partition("/")
    if base == "fish" and variant:
        return _FISH_PALETTE[int(variant) % len(_FISH_PALETTE)]
    if base == "umbrella" and variant:
        return _UMBRELLA_PALETTE[int(variant) % len(_UMBRELLA_PALETTE)]
    return _SPRITE_COLORS.get(base, (200, 200, 200, 255))


def _stamp(pixels: np.ndarray, cmd: DrawCommand, width: int, height: int) -> np.ndarray:
    """Draw one command; returns the coverage mask of its solid body."""
    base = cmd.sprite_id.partition("/")[0]
    color = _sprite_color(cmd.sprite_id)
    s = cmd.scale
    if base == "background":
        return np.zeros((height, width), dtype=bool)
    if base == "lotus":
        pad = _disk_mask(width, height, cmd.x, cmd.y, LOTUS_HALF_PX * s)
        _blend(pixels, pad, _SPRITE_COLORS["lotus_pad"], cmd.opacity)
        bloom = _disk_mask(width, height, cmd.x, cmd.y, LOTUS_HALF_PX * 0.6 * s)
        _blend(pixels, bloom, color, cmd.opacity)
        mask = pad
    elif base == "ripple":
        mask = _ring_mask(width, height, cmd.x, cmd.y, 14.0 * s, 2.5)
        _blend(pixels, mask, color, cmd.opacity * 0.8)
    elif base == "fish":
        mask = _disk_mask(width, height, cmd.x, cmd.y, 9.0 * s)
        _blend(pixels, mask, color, cmd.opacity)
    elif base == "firework_shell":
        mask = _disk_mask(width, height, cmd.x, cmd.y, 5.0 * s)
        _blend(pixels, mask, color, cmd.opacity)
    elif base == "firework_spark":
        mask = _disk_mask(width, height, cmd.x, cmd.y, 2.0 * s)
        _blend(pixels, mask, color, cmd.opacity)
    elif base == "umbrella":
        mask = _triangle_mask(width, height, cmd.x, cmd.y, UMBRELLA_HALF_PX * s)
        _blend(pixels, mask, color, cmd.opacity)
    elif base == "petal":
        mask = _disk_mask(width, height, cmd.x, cmd.y, 2.5 * s)
        _blend(pixels, mask, color, cmd.opacity)
    elif base == "board":
        mask = _rect_mask(width, height, cmd.x - 110, cmd.y - 9 * 14, cmd.x + 110, cmd.y + 10)
        _blend(pixels, mask, color, 0.82)
    elif base == "board_text":
        mask = np.zeros((height, width), dtype=bool)
    else:
        mask = _disk_mask(width, height, cmd.x, cmd.y, 6.0 * s)
        _blend(pixels, mask, color, cmd.opacity)

    if cmd.label is not None:
        box, glyphs = _label_masks(width, height, cmd)
        label_color = _SPRITE_COLORS["board_text" if base.startswith("board") else "label"]
        if base.startswith("board"):
            _blend(pixels, glyphs, label_color, 1.0)
        else:
            _blend(pixels, box, _SPRITE_COLORS["label"], 0.85)
            _blend(pixels, glyphs, _SPRITE_COLORS["label_text"], 1.0)
            mask = mask | box
    return mask


def rasterize(render_list: RenderList, cfg: SceneConfig, background: np.ndarray) -> Frame:
    """Painter's algorithm over the sorted list, then transparent-occluder
    masking: wherever an occluder polygon covers pixels whose topmost
    entity is farther than the occluder's depth, the real background is
    restored."""
    h, w = cfg.height_px, cfg.width_px
    if background.shape[:2] != (h, w):
        raise DimMismatch(f"background {background.shape[:2]} vs screen {(h, w)}")
    pixels = background.copy()
    top_depth = np.full((h, w), -np.inf, dtype=np.float64)
    covered = np.zeros((h, w), dtype=bool)

    for cmd in render_list.commands:
        mask = _stamp(pixels, cmd, w, h)
        if mask.any():
            top_depth[mask] = cmd.z_order
            covered |= mask

    for occ in cfg.occluders:
        poly_mask = _polygon_mask(occ.polygon, w, h)
        restore = poly_mask & covered & (top_depth > occ.depth)
        pixels[restore] = background[restore]

    return Frame(w, h, pixels)


def encode_frame(frame: Frame) -> bytes:
    """Lossless PNG bytes; identical frames encode to identical bytes."""
    img = Image.fromarray(frame.pixels, mode="RGBA")
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def decode_frame(data: bytes) -> Frame:
    img = Image.open(io.BytesIO(data)).convert("RGBA")
    pixels = np.asarray(img, dtype=np.uint8).copy()
    return Frame(img.size[0], img.size[1], pixels)
