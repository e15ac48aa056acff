"""Live room service: ingest connections, one sequencer, fan-out.

Many connections feed decoded events into a single sequencer task that
owns the simulation; viewer clients subscribe to a WebSocket that streams
render lists and board state every tick.  All cross-boundary data are
immutable JSON messages.

Every accepted event is appended to the record file together with the
tick at which it entered the queue, so replaying the recording with the
same seed and plan reproduces the session's effect-log digest exactly.

Endpoints:
  TCP ingest            newline-delimited JSON events, one ack line each
  WS   /ingest          same wire format, one message per event
  WS   /ws              ClientUpdate stream
  GET  /scene /board /health /stats /background.png
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass

import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from arsls.compose import build_render_list, encode_frame, load_background, Frame
from arsls.events import (
    CommandTable,
    DEFAULT_COMMANDS,
    DecodeError,
    RoomEvent,
    decode_event,
    encode_event,
)
from arsls.plan import SessionPlan
from arsls.scene import SceneConfig, scene_to_json
from arsls.session import SessionRunner
from arsls.verse import VerseCorpus

logger = logging.getLogger("arsls.server")

MAX_INBOX = 10_000


@dataclass
class _Client:
    client_id: int
    queue: asyncio.Queue
    task: asyncio.Task | None = None
    dropped: bool = False


class BroadcastHub:
    """Fan-out of immutable update strings.  A client that stops reading
    fills its bounded queue and is dropped (its sender task cancelled);
    the sequencer itself never waits on any client."""

    def __init__(self, buffer_size: int = 128):
        self.buffer_size = buffer_size
        self._clients: dict[int, _Client] = {}
        self._next_id = 1
        self.dropped_count = 0

    def register(self) -> _Client:
        client = _Client(self._next_id, asyncio.Queue(maxsize=self.buffer_size))
        self._next_id += 1
        self._clients[client.client_id] = client
        return client

    def unregister(self, client: _Client) -> None:
        self._clients.pop(client.client_id, None)

    def publish(self, message: str) -> None:
        for client in list(self._clients.values()):
            try:
                client.queue.put_nowait(message)
            except asyncio.QueueFull:
                client.dropped = True
                self.dropped_count += 1
                self._clients.pop(client.client_id, None)
                if client.task is not None:
                    client.task.cancel()

    @property
    def client_count(self) -> int:
        return len(self._clients)


class RoomServer:
    """One live session.  Construction validates config; `start` binds
    ports (failing fast if busy) and launches the sequencer."""

    def __init__(
        self,
        scene: SceneConfig,
        corpus: VerseCorpus,
        plan: SessionPlan,
        commands: CommandTable = DEFAULT_COMMANDS,
        host: str = "127.0.0.1",
        http_port: int = 0,
        ingest_port: int = 0,
        time_scale: float = 1.0,
        record_path: str | None = None,
        broadcast_every: int = 1,
        client_buffer: int = 128,
        keep_log: bool = False,
    ):
        self.scene = scene
        self.corpus = corpus
        self.plan = plan
        self.host = host
        self._requested_http_port = http_port
        self._requested_ingest_port = ingest_port
        self.time_scale = time_scale
        self.record_path = record_path
        self.broadcast_every = max(1, broadcast_every)
        self.hub = BroadcastHub(client_buffer)

        self.runner = SessionRunner(scene, corpus, plan, commands=commands,
                                    keep_log=keep_log, track_recent=True)
        self._inbox: list[tuple[int, RoomEvent]] = []
        self._next_seq = 0
        self.decode_errors = 0
        self.overload_drops = 0
        self.final_digest: str | None = None
        self._record_fh = None
        self._background: Frame | None = None
        self._stopping = asyncio.Event()
        self._tcp_server: asyncio.AbstractServer | None = None
        self._uvicorn: uvicorn.Server | None = None
        self._tasks: list[asyncio.Task] = []
        self.http_port: int | None = None
        self.ingest_port: int | None = None
        self.app = self._build_app()

    # ------------------------------------------------------------------
    # ingest
    # ------------------------------------------------------------------

    def process_line(self, line: str | bytes) -> dict:
        """Decode one wire line and enqueue it.  Never raises: bad lines
        produce an error ack and a counter bump, the connection lives on."""
        decoded = decode_event(line)
        if isinstance(decoded, DecodeError):
            self.decode_errors += 1
            return {"ok": False, "error": decoded.kind.value, "detail": decoded.detail}
        if self.runner.finished:
            return {"ok": False, "error": "SessionOver"}
        if len(self._inbox) >= MAX_INBOX:
            self.overload_drops += 1
            return {"ok": False, "error": "Overloaded"}
        seq = self._next_seq
        self._next_seq += 1
        self._inbox.append((seq, decoded))
        return {"ok": True, "seq": seq}

    async def _handle_tcp_ingest(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while not reader.at_eof():
                line = await reader.readline()
                if not line:
                    break
                if not line.strip():
                    continue
                ack = self.process_line(line)
                writer.write((json.dumps(ack) + "\n").encode("utf-8"))
                await writer.drain()
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            writer.close()

    # ------------------------------------------------------------------
    # sequencer
    # ------------------------------------------------------------------

    def _drain_inbox(self) -> None:
        if not self._inbox:
            return
        recv_tick = self.runner.tick
        for seq, event in self._inbox:
            self.runner.submit(event, seq, recv_tick)
            if self._record_fh is not None:
                record = json.loads(encode_event(event))
                record["recv_tick"] = recv_tick
                self._record_fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._inbox.clear()

    def _client_update(self) -> str:
        state = self.runner.state
        board = state.round.board_view(int(state.now_ms)) if state.round is not None else None
        render_list = build_render_list(state, self.scene, board)
        return json.dumps(
            {
                "type": "update",
                "tick": state.tick,
                "now_ms": state.now_ms,
                "render_list": render_list.to_json(),
                "board": board.to_json() if board is not None else None,
                "effects": state.log.drain_recent(),
            },
            ensure_ascii=False,
        )

    async def _sequencer(self) -> None:
        loop = asyncio.get_running_loop()
        dt_s = self.scene.tuning.dt_ms / 1000.0
        next_time = loop.time()
        try:
            while not self.runner.finished and not self._stopping.is_set():
                self._drain_inbox()
                self.runner.run_tick()
                if self.runner.tick % self.broadcast_every == 0 or self.runner.finished:
                    self.hub.publish(self._client_update())
                if self._record_fh is not None:
                    self._record_fh.flush()
                if self.time_scale > 0:
                    next_time += dt_s / self.time_scale
                    delay = next_time - loop.time()
                    await asyncio.sleep(delay if delay > 0 else 0)
                else:
                    await asyncio.sleep(0)
        finally:
            self.final_digest = self.runner.digest()
            if self._record_fh is not None:
                self._record_fh.flush()
            self.hub.publish(json.dumps({"type": "end", "digest": self.final_digest,
                                         "tick": self.runner.tick}))
            logger.info("session finished at tick %d digest %s", self.runner.tick, self.final_digest)

    # ------------------------------------------------------------------
    # http / websocket app
    # ------------------------------------------------------------------

    def _build_app(self) -> FastAPI:
        app = FastAPI(title="arsls room server")
        server = self

        @app.get("/health")
        def health():
            return {"status": "ok", "tick": server.runner.tick,
                    "finished": server.runner.finished}

        @app.get("/scene")
        def scene():
            return scene_to_json(server.scene)

        @app.get("/board")
        def board():
            state = server.runner.state
            if state.round is None:
                return None
            return state.round.board_view(int(state.now_ms)).to_json()

        @app.get("/stats")
        def stats():
            state = server.runner.state
            return {
                "tick": server.runner.tick,
                "finished": server.runner.finished,
                "clients": server.hub.client_count,
                "decode_errors": server.decode_errors,
                "dropped_clients": server.hub.dropped_count,
                "overload_drops": server.overload_drops,
                "digest": server.final_digest,
                "counters": dict(sorted(state.counters.items())),
            }

        @app.get("/background.png")
        def background_png():
            from fastapi.responses import Response

            if server._background is None:
                pixels = load_background(server.scene)
                server._background = Frame(server.scene.width_px, server.scene.height_px, pixels)
            data = encode_frame(server._background)
            return Response(content=data, media_type="image/png")

        @app.websocket("/ws")
        async def ws_broadcast(ws: WebSocket):
            await ws.accept()
            client = server.hub.register()
            client.task = asyncio.current_task()
            await ws.send_text(json.dumps({
                "type": "hello",
                "tick": server.runner.tick,
                "tick_hz": server.scene.tuning.tick_hz,
                "scene": scene_to_json(server.scene),
            }))

            async def reader():
                # Broadcast is one-way; we read only to notice disconnects.
                try:
                    while True:
                        await ws.receive_text()
                except WebSocketDisconnect:
                    pass

            reader_task = asyncio.create_task(reader())
            try:
                while True:
                    message = await client.queue.get()
                    await ws.send_text(message)
            except (WebSocketDisconnect, RuntimeError):
                pass
            except asyncio.CancelledError:
                # Evicted by the hub for falling behind.
                pass
            finally:
                reader_task.cancel()
                server.hub.unregister(client)
                if not client.dropped:
                    # A graceful close would block on an evicted peer's
                    # dead connection; let the transport teardown handle it.
                    try:
                        await ws.close()
                    except Exception:
                        pass

        @app.websocket("/ingest")
        async def ws_ingest(ws: WebSocket):
            await ws.accept()
            try:
                while True:
                    line = await ws.receive_text()
                    await ws.send_text(json.dumps(server.process_line(line)))
            except WebSocketDisconnect:
                pass

        return app

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    async def start(self) -> None:
        if self.record_path is not None:
            self._record_fh = open(self.record_path, "w", encoding="utf-8")

        self._tcp_server = await asyncio.start_server(
            self._handle_tcp_ingest, self.host, self._requested_ingest_port
        )
        self.ingest_port = self._tcp_server.sockets[0].getsockname()[1]

        # The classic websockets implementation propagates TCP backpressure
        # into `send`, which the bounded-queue drop policy relies on.
        config = uvicorn.Config(
            self.app, host=self.host, port=self._requested_http_port,
            log_level="warning", lifespan="off", ws="websockets",
        )
        self._uvicorn = uvicorn.Server(config)
        self._tasks.append(asyncio.create_task(self._uvicorn.serve()))
        while not self._uvicorn.started:
            await asyncio.sleep(0.01)
        self.http_port = self._uvicorn.servers[0].sockets[0].getsockname()[1]

        self._tasks.append(asyncio.create_task(self._sequencer()))
        logger.info("room server on http=%d ingest=%d", self.http_port, self.ingest_port)

    async def wait_finished(self) -> None:
        """Block until the session plan has fully played out and the
        sequencer has finalized the digest."""
        while self.final_digest is None and not self._stopping.is_set():
            await asyncio.sleep(0.02)

    async def stop(self) -> None:
        self._stopping.set()
        if self._uvicorn is not None:
            self._uvicorn.should_exit = True
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        for task in self._tasks:
            try:
                await asyncio.wait_for(task, timeout=5.0)
            except (asyncio.TimeoutError, asyncio.CancelledError):
                task.cancel()
        if self._record_fh is not None:
            self._record_fh.close()
            self._record_fh = None


def run_session(
    scene: SceneConfig,
    corpus: VerseCorpus,
    plan: SessionPlan,
    **kwargs,
) -> RoomServer:
    """Construct a server for one session; caller drives its lifecycle
    inside an event loop."""
    return RoomServer(scene, corpus, plan, **kwargs)
