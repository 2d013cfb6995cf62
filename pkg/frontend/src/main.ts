// Operator console wiring: canvas, tools, sliders, connection state.

import { barredSet, clickToCommand, Tool, ToolSettings } from "./controls.js";
import { ModeSeries } from "./dashboards.js";
import { SteeringClient } from "./net.js";
import type { NetworkMessage, Snapshot } from "./protocol.js";
import { MapRenderer } from "./render.js";
import { Camera, networkBounds } from "./view.js";

const map = document.getElementById("map") as HTMLCanvasElement;
const chart = document.getElementById("chart") as HTMLCanvasElement;
const status = document.getElementById("status")!;
const banner = document.getElementById("banner")!;

const camera = new Camera();
const series = new ModeSeries(600);
const settings: ToolSettings = { radius: 250, intensity: 0.8 };

let renderer: MapRenderer | null = null;
let network: NetworkMessage | null = null;
let lastSnapshot: Snapshot | null = null;
let selectedEdge: number | null = null;
let tool: Tool = "inspect";
let dragging: { x: number; y: number } | null = null;

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws`;
}

const client = new SteeringClient(
  () => new WebSocket(wsUrl()) as unknown as import("./net.js").SocketLike,
  {
    onNetwork(msg) {
      network = msg;
      renderer = new MapRenderer(msg);
      const pts: [number, number][] = [];
      for (const e of msg.edges) pts.push(...e.points);
      camera.fit(networkBounds(pts), map.width, map.height);
    },
    onSnapshot(snapshot) {
      series.push(snapshot);
    },
    onError(msg) {
      banner.textContent = msg;
      banner.classList.add("visible");
      setTimeout(() => banner.classList.remove("visible"), 2500);
    },
    onDone(hash) {
      banner.textContent = `run complete — world hash ${hash}`;
      banner.classList.add("visible");
    },
    onStatus(state) {
      document.body.dataset.connection = state;
      if (state !== "open") {
        banner.textContent = state === "connecting" ? "connecting…" : "connection lost — retrying";
        banner.classList.add("visible");
      } else {
        banner.classList.remove("visible");
      }
    },
  },
);
client.open();

for (const button of document.querySelectorAll<HTMLButtonElement>("[data-tool]")) {
  button.addEventListener("click", () => {
    tool = button.dataset.tool as Tool;
    for (const other of document.querySelectorAll("[data-tool]")) {
      other.classList.toggle("active", other === button);
    }
  });
}

(document.getElementById("radius") as HTMLInputElement).addEventListener("input", (ev) => {
  settings.radius = Number((ev.target as HTMLInputElement).value);
  document.getElementById("radius-label")!.textContent = `${settings.radius} m`;
});
(document.getElementById("intensity") as HTMLInputElement).addEventListener("input", (ev) => {
  settings.intensity = Number((ev.target as HTMLInputElement).value);
  document.getElementById("intensity-label")!.textContent = settings.intensity.toFixed(2);
});
document.getElementById("pause")!.addEventListener("click", () => client.send({ type: "pause" }));
document.getElementById("resume")!.addEventListener("click", () => client.send({ type: "resume" }));
(document.getElementById("speed") as HTMLInputElement).addEventListener("change", (ev) => {
  const mult = Number((ev.target as HTMLInputElement).value);
  client.send({ type: "speed", mult });
});
(document.getElementById("spawn") as HTMLInputElement).addEventListener("change", (ev) => {
  const rate = Number((ev.target as HTMLInputElement).value);
  client.send({ type: "spawn_rate", rate });
});

map.addEventListener("mousedown", (ev) => {
  dragging = { x: ev.offsetX, y: ev.offsetY };
});
map.addEventListener("mousemove", (ev) => {
  if (dragging) {
    camera.panByPixels(ev.offsetX - dragging.x, ev.offsetY - dragging.y);
    dragging = { x: ev.offsetX, y: ev.offsetY };
  }
});
map.addEventListener("mouseup", (ev) => {
  const start = dragging;
  dragging = null;
  if (!start || !renderer || !network) return;
  const moved = Math.hypot(ev.offsetX - start.x, ev.offsetY - start.y);
  if (moved > 4) return; // it was a pan, not a click
  const barred = barredSet(lastSnapshot?.edges ?? []);
  const result = clickToCommand(
    tool, ev.offsetX, ev.offsetY, camera, map.width, map.height,
    network.edges, barred, settings,
  );
  selectedEdge = result.selectedEdge;
  if (result.command) client.send(result.command);
});
map.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  camera.zoomAt(ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15, map.width, map.height);
});

function resize(): void {
  map.width = map.clientWidth;
  map.height = map.clientHeight;
  chart.width = chart.clientWidth;
  chart.height = chart.clientHeight;
}
window.addEventListener("resize", resize);
resize();

function frame(): void {
  const snapshot = client.snapshots.take();
  if (snapshot) lastSnapshot = snapshot;
  if (renderer) {
    renderer.render(
      map.getContext("2d")!, lastSnapshot, camera, map.width, map.height, selectedEdge,
    );
    series.drawTo(chart.getContext("2d")!, chart.width, chart.height);
  }
  if (lastSnapshot) {
    const c = lastSnapshot.counters;
    status.textContent =
      `t=${lastSnapshot.time_s.toFixed(0)}s tick=${lastSnapshot.tick} ` +
      `vehicles=${c.in_world} arrivals=${c.arrivals} pending=${client.tracker.pendingCount()}`;
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
