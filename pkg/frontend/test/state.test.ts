import { describe, expect, it } from 'vitest';

import type { EffectRecord, UpdateMsg } from '../src/protocol.js';
import { RoomState } from '../src/state.js';

function update(tick: number, effects: EffectRecord[] = [], renderList = []): UpdateMsg {
  return {
    type: 'update',
    tick,
    now_ms: (tick * 1000) / 30,
    render_list: renderList,
    board: null,
    effects,
  };
}

describe('RoomState', () => {
  it('keeps only the latest frame and counts stale ones', () => {
    const state = new RoomState('me');
    state.applyUpdate(update(5));
    state.applyUpdate(update(9));
    state.applyUpdate(update(7)); // stale
    expect(state.latest?.tick).toBe(9);
    expect(state.droppedFrames).toBe(1);
  });

  it('accumulates chat and judgments into the scrollback', () => {
    const state = new RoomState('me');
    state.applyUpdate(
      update(1, [
        { tick: 1, kind: 'chat', user_id: 'a', name: 'Ann', text: 'hello' },
        { tick: 1, kind: 'verse_judged', user_id: 'a', result: 'Accepted', combo: 1 },
      ]),
    );
    expect(state.chat).toHaveLength(2);
    expect(state.chat[0]).toMatchObject({ kind: 'chat', name: 'Ann', text: 'hello' });
    expect(state.chat[1].kind).toBe('judgment');
  });

  it('caps the scrollback', () => {
    const state = new RoomState('me');
    for (let tick = 1; tick <= 300; tick++) {
      state.applyUpdate(update(tick, [{ tick, kind: 'chat', user_id: 'a', name: 'A', text: `${tick}` }]));
    }
    expect(state.chat.length).toBe(200);
    expect(state.chat[state.chat.length - 1].text).toBe('300');
  });

  it('collects notices only for this viewer', () => {
    const state = new RoomState('me');
    state.applyUpdate(
      update(2, [
        { tick: 2, kind: 'rejected', user_id: 'me', reason: 'AlreadyHasLotus' },
        { tick: 2, kind: 'rejected', user_id: 'other', reason: 'NoToken' },
        { tick: 2, kind: 'token_granted', user_id: 'me' },
      ]),
    );
    expect(state.notices.map(n => n.text)).toEqual([
      'rejected: AlreadyHasLotus',
      'umbrella ready — tell your story with #MyStory',
    ]);
  });

  it('reports own sprites for highlight checks', () => {
    const state = new RoomState('me');
    state.applyUpdate({
      ...update(3),
      render_list: [
        { sprite: 'lotus', x: 1, y: 2, z: -2, scale: 1, opacity: 1, user_id: 'me' },
        { sprite: 'lotus', x: 3, y: 4, z: -4, scale: 1, opacity: 1, user_id: 'other' },
      ],
    });
    expect(state.ownSprites()).toEqual(['lotus']);
  });
});
