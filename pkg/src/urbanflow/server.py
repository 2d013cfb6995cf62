"""Live steering service: snapshot streaming plus operator commands.

One asyncio task owns the simulation loop, paced to wall clock by an
adjustable speed multiplier. Clients connect to /ws, get the network once,
then a snapshot every few ticks. Commands use the scripted-event schema
(plus pause/resume/speed) and are queued, landing only at tick boundaries,
so a served run fed the same commands at the same ticks hashes identically
to a scripted one.
"""

from __future__ import annotations

import asyncio
import contextlib
import os

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from .config import EventCfg, ScenarioConfig
from .errors import UrbanflowError
from .runner import apply_event, export_world, make_world, network_message, snapshot

_CONTROL_TYPES = {"pause", "resume", "speed"}
_EVENT_TYPES = {"bar_edge", "unbar_edge", "explosion", "spawn_rate"}


class SimulationService:
    def __init__(self, config: ScenarioConfig, tables_path: str | None = None):
        self.config = config
        self.world = make_world(config, tables_path)
        self.n_ticks = int(round(config.sim.duration_s / config.sim.dt))
        self._scripted: dict[int, list[EventCfg]] = {}
        for ev in config.events:
            self._scripted.setdefault(ev.at_tick, []).append(ev)
        self._scheduled: dict[int, list[EventCfg]] = {}
        self._pending: list[EventCfg] = []
        self.paused = config.server.start_paused
        self.speed = config.server.speed
        self.clients: list[WebSocket] = []
        self.done = False
        self.final_hash: str | None = None
        self.summary: dict | None = None

    # -- commands ------------------------------------------------------------

    def handle_command(self, msg: dict) -> dict:
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "msg": "command needs a 'type'"}
        kind = msg.get("type")
        cmd_id = msg.get("cmd_id")
        if kind == "pause":
            self.paused = True
            return {"type": "ack", "cmd_id": cmd_id}
        if kind == "resume":
            self.paused = False
            return {"type": "ack", "cmd_id": cmd_id}
        if kind == "speed":
            mult = msg.get("mult")
            if not isinstance(mult, (int, float)) or mult <= 0:
                return {"type": "error", "msg": "speed needs mult > 0", "cmd_id": cmd_id}
            self.speed = float(mult)
            return {"type": "ack", "cmd_id": cmd_id}
        if kind not in _EVENT_TYPES:
            return {"type": "error", "msg": f"unknown command type {kind!r}", "cmd_id": cmd_id}

        at_tick = msg.get("at_tick")
        payload = {k: v for k, v in msg.items() if k not in ("type", "cmd_id", "at_tick")}
        try:
            event = EventCfg(kind=kind, at_tick=int(at_tick) if at_tick is not None else 0,
                             **payload)
        except (ValidationError, TypeError, ValueError) as exc:
            return {"type": "error", "msg": str(exc), "cmd_id": cmd_id}
        if event.kind in ("bar_edge", "unbar_edge") and not (
                0 <= event.edge < len(self.world.graph.edges)):
            return {"type": "error", "msg": f"unknown edge {event.edge}", "cmd_id": cmd_id}
        if at_tick is not None and event.at_tick > self.world.tick_index:
            self._scheduled.setdefault(event.at_tick, []).append(event)
        else:
            self._pending.append(event)
        return {"type": "ack", "cmd_id": cmd_id}

    def _apply_boundary_events(self) -> None:
        tick = self.world.tick_index
        for ev in self._scripted.pop(tick, ()):
            apply_event(self.world, ev, self.config.crisis_defaults)
        for ev in self._scheduled.pop(tick, ()):
            apply_event(self.world, ev, self.config.crisis_defaults)
        pending, self._pending = self._pending, []
        for ev in pending:
            apply_event(self.world, ev, self.config.crisis_defaults)

    # -- loop ----------------------------------------------------------------

    async def run_loop(self) -> None:
        clock = asyncio.get_event_loop().time
        cap = self.config.server.vehicle_cap
        every = max(1, self.config.server.snapshot_every)
        while self.world.tick_index < self.n_ticks:
            start = clock()
            self._apply_boundary_events()
            if self.paused:
                await self._broadcast(snapshot(self.world, cap))
                await asyncio.sleep(0.1)
                continue
            self.world.tick()
            if self.world.tick_index % every == 0:
                await self._broadcast(snapshot(self.world, cap))
            target = self.config.sim.dt / self.speed
            delay = target - (clock() - start)
            await asyncio.sleep(delay if delay > 0.0005 else 0)
        self._apply_boundary_events()
        self.done = True
        self.final_hash = self.world.world_hash()
        self.summary = export_world(self.world, self.config.output.dir)
        await self._broadcast({"type": "done", "world_hash": self.final_hash})

    async def _broadcast(self, message: dict) -> None:
        dead = []
        for ws in self.clients:
            try:
                await ws.send_json(message)
            except Exception:
                dead.append(ws)
        for ws in dead:
            if ws in self.clients:
                self.clients.remove(ws)


def create_app(config: ScenarioConfig, tables_path: str | None = None,
               ui_dir: str | None = None) -> FastAPI:
    service = SimulationService(config, tables_path)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(service.run_loop())
        yield
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task

    app = FastAPI(lifespan=lifespan)
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        service.clients.append(websocket)
        try:
            await websocket.send_json(network_message(service.world.graph))
            if service.done:
                await websocket.send_json({"type": "done", "world_hash": service.final_hash})
            while True:
                try:
                    msg = await websocket.receive_json()
                except ValueError:
                    await websocket.send_json({"type": "error", "msg": "malformed JSON"})
                    continue
                await websocket.send_json(service.handle_command(msg))
        except WebSocketDisconnect:
            pass
        finally:
            if websocket in service.clients:
                service.clients.remove(websocket)

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(config: ScenarioConfig, port: int, tables_path: str | None = None,
          ui_dir: str | None = None) -> None:
    import uvicorn

    app = create_app(config, tables_path, ui_dir)
    uvicorn.run(app, host="0.0.0.0", port=port, log_level="warning")
