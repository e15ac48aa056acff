// Browser wiring: canvas + board panel + chat pane + input row.
// Everything rendered comes from server updates; the inputs only emit
// wire-format events.

import { RoomConnection, type ConnStatus } from './net.js';
import { GIFT_BUTTONS, validGiftAmount, type UpdateMsg } from './protocol.js';
import { drawScene } from './renderer.js';
import { RoomState } from './state.js';

const qs = new URLSearchParams(location.search);
const httpBase = qs.get('room') ?? `${location.protocol}//${location.host}`;
const wsBase = httpBase.replace(/^http/, 'ws');
const displayName = qs.get('name') ?? `guest-${Math.random().toString(36).slice(2, 6)}`;

const canvas = document.getElementById('scene') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const statusBanner = document.getElementById('status')!;
const boardPane = document.getElementById('board')!;
const chatPane = document.getElementById('chat')!;
const noticePane = document.getElementById('notices')!;
const input = document.getElementById('say') as HTMLInputElement;
const giftRow = document.getElementById('gifts')!;
const advanced = document.getElementById('advanced-amount') as HTMLInputElement;

let background: ImageBitmap | null = null;
let latestDrawn = -1;

const storage = {
  get: (k: string) => localStorage.getItem(k),
  set: (k: string, v: string) => localStorage.setItem(k, v),
};

const conn = new RoomConnection({
  baseUrl: wsBase,
  displayName,
  storage,
  handlers: {
    onHello: hello => {
      canvas.width = hello.scene.screen.width_px;
      canvas.height = hello.scene.screen.height_px;
      void fetch(`${httpBase}/background.png`)
        .then(r => r.blob())
        .then(createImageBitmap)
        .then(bmp => (background = bmp))
        .catch(() => undefined);
    },
    onUpdate: update => state.applyUpdate(update),
    onEnd: msg => {
      statusBanner.textContent = `session ended — digest ${msg.digest.slice(0, 12)}…`;
      statusBanner.className = 'ended';
    },
    onStatus: renderStatus,
  },
});
const state = new RoomState(conn.userId);
conn.connect();

function renderStatus(status: ConnStatus): void {
  const text: Record<ConnStatus, string> = {
    connecting: 'connecting…',
    connected: '',
    retrying: 'connection lost — retrying…',
    ended: '',
    stopped: '',
  };
  statusBanner.textContent = text[status];
  statusBanner.className = status === 'retrying' ? 'retrying' : '';
}

function frame(): void {
  requestAnimationFrame(frame);
  const update: UpdateMsg | null = state.latest;
  if (update === null || update.tick === latestDrawn || conn.hello === null) return;
  latestDrawn = update.tick;
  drawScene(ctx, update, conn.hello.scene, conn.userId, background);
  renderPanels();
}
requestAnimationFrame(frame);

function renderPanels(): void {
  const board = state.board;
  if (board === null) {
    boardPane.innerHTML = '<em>no verse round active</em>';
  } else {
    const rows = board.last_nine.map(v => `<li>${escapeHtml(v)}</li>`).join('');
    boardPane.innerHTML =
      `<h3>${escapeHtml(board.mode)}: ${escapeHtml(board.value)}</h3>` +
      `<ol>${rows}</ol>` +
      `<p>⏱ ${Math.ceil(board.countdown_ms / 1000)}s · combo ${board.combo} · ` +
      `${board.progress.count}/${board.progress.threshold} · ${board.outcome}</p>`;
  }
  chatPane.innerHTML = state.chat
    .slice(-40)
    .map(entry =>
      entry.kind === 'chat'
        ? `<div><b>${escapeHtml(entry.name)}</b>: ${escapeHtml(entry.text)}</div>`
        : `<div class="judgment">${escapeHtml(entry.name)} — ${escapeHtml(entry.text)}</div>`,
    )
    .join('');
  chatPane.scrollTop = chatPane.scrollHeight;
  noticePane.innerHTML = state.notices
    .map(n => `<div class="toast">${escapeHtml(n.text)}</div>`)
    .join('');
}

function escapeHtml(s: string): string {
  return s.replace(/[&<>"']/g, c => `&#${c.charCodeAt(0)};`);
}

input.addEventListener('keydown', ev => {
  if (ev.key !== 'Enter' || input.value.trim() === '') return;
  void conn.sendChat(input.value).then(ack => {
    if (ack.ok) input.value = '';
  });
});

for (const amount of GIFT_BUTTONS) {
  const button = document.createElement('button');
  button.textContent = `🎁 ${amount}`;
  button.addEventListener('click', () => void conn.sendGift(amount));
  giftRow.insertBefore(button, advanced);
}
advanced.addEventListener('keydown', ev => {
  if (ev.key !== 'Enter') return;
  const amount = validGiftAmount(advanced.value);
  if (amount !== null) {
    void conn.sendGift(amount).then(ack => {
      if (ack.ok) advanced.value = '';
    });
  }
});
document.getElementById('advanced-toggle')!.addEventListener('click', () => {
  advanced.classList.toggle('hidden');
});
