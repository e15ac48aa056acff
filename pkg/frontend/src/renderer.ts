// Canvas drawing of one server update. The render list arrives sorted
// back-to-front and is drawn strictly in that order — the client never
// reorders or invents entities (thin-client contract). The viewer's own
// lotus/umbrella get a highlight ring so their proxy stands out.

import type { DrawCommandJson, SceneJson, UpdateMsg } from './protocol.js';

// Structural subset of CanvasRenderingContext2D so tests can pass a
// recording stub and node never needs a real canvas.
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  globalAlpha: number;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  drawImage?(image: unknown, x: number, y: number, w?: number, h?: number): void;
}

const SPRITE_COLORS: Record<string, string> = {
  lotus: '#ee82b4',
  lotus_pad: '#2e8c5a',
  ripple: '#dcf0ff',
  firework_shell: '#ffe678',
  firework_spark: '#ffb43c',
  petal: '#ffb6cb',
  board: 'rgba(20, 26, 40, 0.82)',
  board_text: '#ebebeb',
};

const FISH_PALETTE = ['#ff8c3c', '#fafafa', '#e63c32', '#ffc85a'];
const UMBRELLA_PALETTE = ['#c45046', '#5a78c8', '#6eaa5a', '#d2aa50', '#965aaa', '#50aaaa'];
const HIGHLIGHT = '#ffd700';

function spriteColor(sprite: string): string {
  const [base, variant] = sprite.split('/');
  if (base === 'fish' && variant !== undefined) {
    return FISH_PALETTE[Number(variant) % FISH_PALETTE.length];
  }
  if (base === 'umbrella' && variant !== undefined) {
    return UMBRELLA_PALETTE[Number(variant) % UMBRELLA_PALETTE.length];
  }
  return SPRITE_COLORS[base] ?? '#c8c8c8';
}

function circle(ctx: Ctx2D, x: number, y: number, r: number): void {
  ctx.beginPath();
  ctx.arc(x, y, r, 0, Math.PI * 2);
  ctx.fill();
}

function drawLabel(ctx: Ctx2D, text: string, x: number, y: number): void {
  ctx.font = '12px sans-serif';
  ctx.fillStyle = 'rgba(15, 15, 20, 0.85)';
  const w = text.length * 7 + 8;
  ctx.fillRect(x - w / 2, y - 40, w, 16);
  ctx.fillStyle = '#f0f0f0';
  ctx.fillText(text, x - w / 2 + 4, y - 28);
}

export function drawCommand(ctx: Ctx2D, cmd: DrawCommandJson, selfId: string | null): void {
  const base = cmd.sprite.split('/')[0];
  const { x, y } = cmd;
  const s = cmd.scale;
  ctx.globalAlpha = cmd.opacity;
  ctx.fillStyle = spriteColor(cmd.sprite);

  switch (base) {
    case 'background':
      return; // drawn separately from the background image
    case 'lotus':
      ctx.fillStyle = SPRITE_COLORS.lotus_pad;
      circle(ctx, x, y, 12 * s);
      ctx.fillStyle = SPRITE_COLORS.lotus;
      circle(ctx, x, y, 7 * s);
      break;
    case 'ripple':
      ctx.strokeStyle = SPRITE_COLORS.ripple;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(x, y, 14 * s, 0, Math.PI * 2);
      ctx.stroke();
      break;
    case 'fish':
      circle(ctx, x, y, 9 * s);
      break;
    case 'firework_shell':
      circle(ctx, x, y, 5 * s);
      break;
    case 'firework_spark':
      circle(ctx, x, y, 2 * s);
      break;
    case 'umbrella':
      ctx.beginPath();
      ctx.moveTo(x, y - 16 * s);
      ctx.lineTo(x + 16 * s, y + 16 * s);
      ctx.lineTo(x - 16 * s, y + 16 * s);
      ctx.closePath();
      ctx.fill();
      break;
    case 'petal':
      circle(ctx, x, y, 2.5 * s);
      break;
    case 'board':
      ctx.fillStyle = SPRITE_COLORS.board;
      ctx.fillRect(x - 110, y - 126, 220, 136);
      break;
    case 'board_text':
      if (cmd.label !== undefined) {
        ctx.font = '12px sans-serif';
        ctx.fillStyle = SPRITE_COLORS.board_text;
        ctx.fillText(cmd.label, x, y + 10);
      }
      ctx.globalAlpha = 1;
      return;
    default:
      circle(ctx, x, y, 6 * s);
  }

  if (cmd.label !== undefined) {
    drawLabel(ctx, cmd.label, x, y);
  }
  if (selfId !== null && cmd.user_id === selfId) {
    ctx.strokeStyle = HIGHLIGHT;
    ctx.lineWidth = 2.5;
    ctx.beginPath();
    ctx.arc(x, y, 18 * s, 0, Math.PI * 2);
    ctx.stroke();
  }
  ctx.globalAlpha = 1;
}

export function drawScene(
  ctx: Ctx2D,
  update: UpdateMsg,
  scene: SceneJson,
  selfId: string | null,
  background: unknown | null = null,
): void {
  const { width_px, height_px } = scene.screen;
  if (background !== null && ctx.drawImage) {
    ctx.drawImage(background, 0, 0, width_px, height_px);
  } else {
    ctx.fillStyle = '#8aa0c8';
    ctx.fillRect(0, 0, width_px, height_px);
    ctx.fillStyle = '#285a8c';
    ctx.beginPath();
    scene.water.forEach(([wx, wy], i) => (i === 0 ? ctx.moveTo(wx, wy) : ctx.lineTo(wx, wy)));
    ctx.closePath();
    ctx.fill();
  }
  for (const cmd of update.render_list) {
    drawCommand(ctx, cmd, selfId);
  }
}
