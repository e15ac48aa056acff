// Client-side room state: a thin accumulation layer over server updates.
// The server is authoritative for everything; this module only keeps the
// latest frame (older ones are dropped, never queued), a bounded chat
// scrollback, and the notices addressed to this viewer.

import type { BoardJson, EffectRecord, EndMsg, UpdateMsg } from './protocol.js';

export interface ChatEntry {
  kind: 'chat' | 'judgment';
  userId: string;
  name: string;
  text: string;
}

export interface Notice {
  tick: number;
  text: string;
}

const SCROLLBACK = 200;
const NOTICE_LIMIT = 6;

const NOTICE_TEXT: Record<string, (e: EffectRecord) => string> = {
  lotus_spawned: () => 'your lotus is on the lake',
  lotus_despawned: () => 'your lotus drifted away — release another',
  lotus_dash: () => 'lotus dashing!',
  fish_spawned: () => 'your fish food is in the water',
  token_granted: () => 'umbrella ready — tell your story with #MyStory',
  umbrella_spawned: () => 'your story umbrella is rising',
  rejected: e => `rejected: ${String(e.reason ?? 'not allowed')}`,
  verse_judged: e => `verse: ${String(e.result)}`,
};

export class RoomState {
  latest: UpdateMsg | null = null;
  board: BoardJson | null = null;
  chat: ChatEntry[] = [];
  notices: Notice[] = [];
  ended: EndMsg | null = null;
  droppedFrames = 0;

  constructor(readonly selfId: string) {}

  applyUpdate(update: UpdateMsg): void {
    if (this.latest !== null && update.tick <= this.latest.tick) {
      this.droppedFrames += 1;
      return; // stale or duplicate; the latest frame always wins
    }
    this.latest = update;
    this.board = update.board;
    for (const effect of update.effects) {
      this.consumeEffect(effect);
    }
  }

  private consumeEffect(effect: EffectRecord): void {
    if (effect.kind === 'chat') {
      this.pushChat({
        kind: 'chat',
        userId: String(effect.user_id ?? ''),
        name: String(effect.name ?? effect.user_id ?? '?'),
        text: String(effect.text ?? ''),
      });
    } else if (effect.kind === 'verse_judged') {
      this.pushChat({
        kind: 'judgment',
        userId: String(effect.user_id ?? ''),
        name: String(effect.user_id ?? '?'),
        text: `${String(effect.result)} (combo ${String(effect.combo)})`,
      });
    }
    if (effect.user_id === this.selfId) {
      const toText = NOTICE_TEXT[effect.kind];
      if (toText) {
        this.notices.push({ tick: effect.tick, text: toText(effect) });
        if (this.notices.length > NOTICE_LIMIT) {
          this.notices.splice(0, this.notices.length - NOTICE_LIMIT);
        }
      }
    }
  }

  private pushChat(entry: ChatEntry): void {
    this.chat.push(entry);
    if (this.chat.length > SCROLLBACK) {
      this.chat.splice(0, this.chat.length - SCROLLBACK);
    }
  }

  end(msg: EndMsg): void {
    this.ended = msg;
  }

  ownSprites(): string[] {
    if (!this.latest) return [];
    return this.latest.render_list
      .filter(c => c.user_id === this.selfId)
      .map(c => c.sprite);
  }
}
