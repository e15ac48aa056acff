// Wire types shared with the room server: newline-delimited JSON events
// go up the ingest socket, JSON ClientUpdates come down the broadcast
// socket. The client never invents state; everything below mirrors the
// server's schema.

export interface DrawCommandJson {
  sprite: string;
  x: number;
  y: number;
  z: number;
  scale: number;
  opacity: number;
  label?: string;
  user_id?: string;
}

export interface BoardJson {
  mode: string;
  value: string;
  last_nine: string[];
  countdown_ms: number;
  combo: number;
  progress: { count: number; threshold: number };
  outcome: string;
}

export interface EffectRecord {
  tick: number;
  kind: string;
  user_id?: string;
  [key: string]: unknown;
}

export interface SceneJson {
  screen: { width_px: number; height_px: number };
  water: number[][];
  background_ref: string;
}

export interface HelloMsg {
  type: 'hello';
  tick: number;
  tick_hz: number;
  scene: SceneJson;
}

export interface UpdateMsg {
  type: 'update';
  tick: number;
  now_ms: number;
  render_list: DrawCommandJson[];
  board: BoardJson | null;
  effects: EffectRecord[];
}

export interface EndMsg {
  type: 'end';
  digest: string;
  tick: number;
}

export type ServerMsg = HelloMsg | UpdateMsg | EndMsg;

export interface IngestAck {
  ok: boolean;
  seq?: number;
  error?: string;
  detail?: string;
}

export function parseServerMsg(data: string): ServerMsg {
  const msg = JSON.parse(data) as ServerMsg;
  if (msg.type !== 'hello' && msg.type !== 'update' && msg.type !== 'end') {
    throw new Error(`unknown server message type: ${(msg as { type: string }).type}`);
  }
  return msg;
}

export function chatEvent(userId: string, displayName: string, tsMs: number, text: string): string {
  return JSON.stringify({
    kind: 'chat',
    user_id: userId,
    display_name: displayName,
    ts_ms: Math.max(0, Math.round(tsMs)),
    text,
  });
}

export function giftEvent(userId: string, displayName: string, tsMs: number, amountCny: string): string {
  return JSON.stringify({
    kind: 'gift',
    user_id: userId,
    display_name: displayName,
    ts_ms: Math.max(0, Math.round(tsMs)),
    amount_cny: amountCny,
  });
}

// Two taps cover both gift tiers: below 10 CNY launches a firework,
// 10 and above grants a story umbrella.
export const GIFT_BUTTONS = ['1.00', '5.00', '9.90', '10.00', '52.00'] as const;

export function validGiftAmount(raw: string): string | null {
  if (!/^\d+(\.\d{1,2})?$/.test(raw.trim())) return null;
  return raw.trim();
}
