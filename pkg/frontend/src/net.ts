// Room connection: broadcast subscription, event submission, session
// time estimation, and reconnection. All game state comes from server
// updates; the client only stamps its events with an estimate of the
// current session time derived from the last message it saw.

import {
  chatEvent,
  giftEvent,
  parseServerMsg,
  type HelloMsg,
  type IngestAck,
  type ServerMsg,
  type UpdateMsg,
  type EndMsg,
} from './protocol.js';

export type ConnStatus = 'connecting' | 'connected' | 'retrying' | 'ended' | 'stopped';

// Structural WebSocket so both browser WebSocket and the `ws` package fit.
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface KeyValue {
  get(key: string): string | null;
  set(key: string, value: string): void;
}

export interface RoomHandlers {
  onHello?(msg: HelloMsg): void;
  onUpdate?(msg: UpdateMsg): void;
  onEnd?(msg: EndMsg): void;
  onStatus?(status: ConnStatus): void;
}

export interface RoomOptions {
  baseUrl: string; // e.g. "ws://127.0.0.1:8400"
  displayName: string;
  handlers?: RoomHandlers;
  storage?: KeyValue;
  wsFactory?: (url: string) => WsLike;
  now?: () => number;
  reconnectDelayMs?: number;
}

const USER_ID_KEY = 'arsls.user_id';

export function loadOrCreateUserId(storage: KeyValue): string {
  const existing = storage.get(USER_ID_KEY);
  if (existing) return existing;
  const fresh = 'viewer-' + Math.random().toString(36).slice(2, 10);
  storage.set(USER_ID_KEY, fresh);
  return fresh;
}

export class RoomConnection {
  readonly userId: string;
  status: ConnStatus = 'connecting';
  hello: HelloMsg | null = null;

  private readonly handlers: RoomHandlers;
  private readonly wsFactory: (url: string) => WsLike;
  private readonly now: () => number;
  private readonly reconnectDelayMs: number;
  private broadcast: WsLike | null = null;
  private ingest: WsLike | null = null;
  private ingestReady = false;
  private ingestBacklog: string[] = [];
  private pendingAcks: Array<(ack: IngestAck) => void> = [];
  private timeBase: { sessionMs: number; wallMs: number } | null = null;
  private stopped = false;

  constructor(private readonly opts: RoomOptions) {
    const storage = opts.storage ?? memoryStorage();
    this.userId = loadOrCreateUserId(storage);
    this.handlers = opts.handlers ?? {};
    this.wsFactory = opts.wsFactory ?? (url => new WebSocket(url) as unknown as WsLike);
    this.now = opts.now ?? (() => Date.now());
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 1000;
  }

  connect(): void {
    this.openBroadcast();
    this.openIngest();
  }

  // Session time = last known (tick time) + wall time elapsed since. Good
  // enough for stamping events; the server applies late ones anyway.
  sessionNowMs(): number {
    if (this.timeBase === null) return 0;
    return this.timeBase.sessionMs + (this.now() - this.timeBase.wallMs);
  }

  sendChat(text: string): Promise<IngestAck> {
    return this.sendLine(chatEvent(this.userId, this.opts.displayName, this.sessionNowMs(), text));
  }

  sendGift(amountCny: string): Promise<IngestAck> {
    return this.sendLine(giftEvent(this.userId, this.opts.displayName, this.sessionNowMs(), amountCny));
  }

  stop(): void {
    this.stopped = true;
    this.setStatus('stopped');
    this.broadcast?.close();
    this.ingest?.close();
  }

  private setStatus(status: ConnStatus): void {
    this.status = status;
    this.handlers.onStatus?.(status);
  }

  private openBroadcast(): void {
    this.setStatus(this.hello === null ? 'connecting' : 'retrying');
    const ws = this.wsFactory(this.opts.baseUrl + '/ws');
    this.broadcast = ws;
    ws.onopen = () => this.setStatus('connected');
    ws.onmessage = ev => this.routeMessage(String(ev.data));
    ws.onerror = () => undefined; // close always follows
    ws.onclose = () => {
      if (this.stopped || this.status === 'ended') return;
      this.setStatus('retrying');
      setTimeout(() => {
        if (!this.stopped) this.openBroadcast();
      }, this.reconnectDelayMs);
    };
  }

  private openIngest(): void {
    const ws = this.wsFactory(this.opts.baseUrl + '/ingest');
    this.ingest = ws;
    this.ingestReady = false;
    ws.onopen = () => {
      this.ingestReady = true;
      for (const line of this.ingestBacklog.splice(0)) {
        ws.send(line);
      }
    };
    ws.onmessage = ev => {
      const resolve = this.pendingAcks.shift();
      if (resolve) resolve(JSON.parse(String(ev.data)) as IngestAck);
    };
    ws.onerror = () => undefined;
    ws.onclose = () => {
      this.ingestReady = false;
      for (const resolve of this.pendingAcks.splice(0)) {
        resolve({ ok: false, error: 'ConnectionClosed' });
      }
      if (!this.stopped && this.status !== 'ended') {
        setTimeout(() => {
          if (!this.stopped) this.openIngest();
        }, this.reconnectDelayMs);
      }
    };
  }

  private sendLine(line: string): Promise<IngestAck> {
    return new Promise(resolve => {
      this.pendingAcks.push(resolve);
      if (this.ingestReady && this.ingest) {
        this.ingest.send(line);
      } else {
        this.ingestBacklog.push(line);
      }
    });
  }

  private routeMessage(data: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMsg(data);
    } catch {
      return; // unknown message; ignore rather than crash the room
    }
    if (msg.type === 'hello') {
      this.hello = msg;
      this.timeBase = { sessionMs: (msg.tick * 1000) / msg.tick_hz, wallMs: this.now() };
      this.handlers.onHello?.(msg);
    } else if (msg.type === 'update') {
      this.timeBase = { sessionMs: msg.now_ms, wallMs: this.now() };
      this.handlers.onUpdate?.(msg);
    } else {
      this.setStatus('ended');
      this.handlers.onEnd?.(msg);
    }
  }
}

function memoryStorage(): KeyValue {
  const map = new Map<string, string>();
  return {
    get: key => map.get(key) ?? null,
    set: (key, value) => void map.set(key, value),
  };
}
