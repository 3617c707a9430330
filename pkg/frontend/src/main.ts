/** DOM bootstrap: canvas, input wiring, stats overlay.
 * Configuration via query string: ?host=http://localhost:8080&session=me */

import { FrameClient, FrameResult } from "./client.js";
import { Player } from "./player.js";
import { applyInput, initialState, poseTag, ViewState } from "./state.js";

const params = new URLSearchParams(location.search);
const host = params.get("host") ?? "http://localhost:8080";
const session = params.get("session") ?? "";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const overlay = document.getElementById("stats") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;
const ctx = canvas.getContext("2d")!;

let state: ViewState = initialState();
let lastDisplayMs = 0;

function paint(result: FrameResult): void {
  void createImageBitmap(result.blob).then((bmp) => {
    ctx.drawImage(bmp, 0, 0, canvas.width, canvas.height);
    const now = performance.now();
    state = {
      ...state,
      stats: {
        ...result.stats,
        displayIntervalMs: lastDisplayMs ? now - lastDisplayMs : 0,
      },
    };
    lastDisplayMs = now;
    renderOverlay();
  });
}

function renderOverlay(): void {
  const s = state.stats;
  const fps = s && s.displayIntervalMs > 0 ? (1000 / s.displayIntervalMs).toFixed(1) : "-";
  overlay.textContent = [
    `yaw ${state.yaw.toFixed(1)}  pitch ${state.pitch.toFixed(1)}`,
    `frame ${state.frame}  ${state.playing ? "playing" : "paused"}`,
    `foveation ${state.foveate ? "on" : "off"}  gaze ${state.gazeU.toFixed(2)},${state.gazeV.toFixed(2)}`,
    s ? `bytes ${s.bytesLoaded}  records ${s.records}  decode ${s.decodeMs.toFixed(1)} ms  fps ${fps}` : "",
  ].join("\n");
  banner.textContent = state.error ?? "";
  banner.style.display = state.error ? "block" : "none";
}

const client = new FrameClient(
  {
    host,
    session,
    outWidth: canvas.width,
    outHeight: canvas.height,
    fovH: state.fovH,
    fovV: state.fovV,
  },
  (url) => fetch(url),
  paint,
  (message) => {
    state = { ...state, playing: false, error: message };
    renderOverlay();
  },
);

client
  .info()
  .then((info) => {
    const player = new Player(client, info.fps, info.frame_count);

    let dragging = false;
    canvas.addEventListener("pointerdown", () => (dragging = true));
    window.addEventListener("pointerup", () => (dragging = false));
    canvas.addEventListener("pointermove", (ev) => {
      const rect = canvas.getBoundingClientRect();
      state = applyInput(state, {
        kind: "gaze",
        u: (ev.clientX - rect.left) / rect.width,
        v: (ev.clientY - rect.top) / rect.height,
      });
      if (dragging) {
        state = applyInput(state, {
          kind: "drag",
          dxPx: ev.movementX,
          dyPx: ev.movementY,
          viewWidthPx: rect.width,
          viewHeightPx: rect.height,
        });
        player.refresh(state);
      }
      renderOverlay();
    });
    window.addEventListener("keydown", (ev) => {
      if (ev.key === " " || ev.key.toLowerCase() === "f") {
        ev.preventDefault();
        state = applyInput(state, { kind: "key", key: ev.key === " " ? " " : "f" });
        player.refresh(state);
        renderOverlay();
      }
    });

    const loop = (now: number) => {
      state = player.tick(state, now);
      requestAnimationFrame(loop);
    };
    client.request(poseTag(state));
    requestAnimationFrame(loop);
    renderOverlay();
  })
  .catch((err) => {
    state = { ...state, error: `service unreachable: ${err}` };
    renderOverlay();
  });
