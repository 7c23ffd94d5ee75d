/** Viewer bootstrap: login, live screen pump, input wiring, panels. */

import { CmdChannel } from "./cmd.js";
import { GestureComposer } from "./composer.js";
import { ENCODING_CORRE, ENCODING_HEXTILE, ENCODING_RAW, ENCODING_RRE, ENCODING_TIGHT, ENCODING_ZLIB } from "./decoders.js";
import { encodeSecret } from "./mac.js";
import { AppsPanel, FilesPanel, ProcessesPanel, StatusPanel } from "./panels.js";
import { ScreenRenderer } from "./render.js";
import { KEY_BACK, KEY_HOME, KEY_MENU, RfbConnection } from "./rfb.js";
import { openWebSocketStream } from "./stream.js";

const REQUEST_INTERVAL_MS = 16;

const PREFERRED_ENCODINGS = [
  ENCODING_TIGHT,
  ENCODING_ZLIB,
  ENCODING_HEXTILE,
  ENCODING_CORRE,
  ENCODING_RRE,
  ENCODING_RAW,
];

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function wsUrl(path: string): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}${path}`;
}

async function connect(secret: string | null): Promise<void> {
  const secretBytes = secret ? encodeSecret(secret) : undefined;
  const rfb = await RfbConnection.connect(await openWebSocketStream(wsUrl("/ws/rfb")), secretBytes);
  const cmd = await CmdChannel.connect(await openWebSocketStream(wsUrl("/ws/cmd")), secretBytes);

  byId<HTMLDivElement>("login").style.display = "none";
  byId<HTMLDivElement>("console").style.display = "grid";
  byId<HTMLSpanElement>("device-name").textContent = `${rfb.name} ${rfb.width}x${rfb.height}`;

  const canvas = byId<HTMLCanvasElement>("screen");
  const overlay = byId<HTMLCanvasElement>("overlay");
  overlay.width = rfb.width;
  overlay.height = rfb.height;
  const renderer = new ScreenRenderer(canvas, rfb.width, rfb.height, rfb.format);
  const composer = new GestureComposer();
  const overlayCtx = overlay.getContext("2d")!;

  const statusPanel = new StatusPanel(cmd, byId("panel-status"), byId("alerts"));
  const appsPanel = new AppsPanel(cmd, byId("panel-apps"));
  const processesPanel = new ProcessesPanel(cmd, byId("panel-processes"));
  const filesPanel = new FilesPanel(cmd, byId("panel-files"));
  const panels: Record<string, { refresh(): Promise<void> }> = {
    status: statusPanel,
    apps: appsPanel,
    processes: processesPanel,
    files: filesPanel,
  };
  for (const name of Object.keys(panels)) {
    byId<HTMLButtonElement>(`tab-${name}`).onclick = () => {
      for (const other of Object.keys(panels)) {
        byId(`panel-${other}`).style.display = other === name ? "block" : "none";
        byId(`tab-${other}`).classList.toggle("active", other === name);
      }
      void panels[name]!.refresh();
    };
  }
  await statusPanel.refresh();
  setInterval(() => void statusPanel.refresh(), 3000);

  // --- live screen pump: one outstanding update request at a time -----------
  const fps = byId<HTMLSpanElement>("update-rate");
  let updates = 0;
  setInterval(() => {
    fps.textContent = `${updates} upd/s`;
    updates = 0;
  }, 1000);

  rfb.setEncodings(PREFERRED_ENCODINGS);
  rfb.requestUpdate(false);
  void (async () => {
    let lastRequest = performance.now();
    for (;;) {
      let rects;
      try {
        rects = await rfb.readUpdate();
      } catch (error) {
        byId("alerts").append(
          Object.assign(document.createElement("div"), {
            className: "alert-toast",
            textContent: `session ended: ${error instanceof Error ? error.message : error}`,
          }),
        );
        return;
      }
      try {
        rfb.apply(rects);
        renderer.blit(rfb, rects);
      } catch (error) {
        // a malformed payload must not kill the page; surface and stop
        byId("alerts").append(
          Object.assign(document.createElement("div"), {
            className: "alert-toast",
            textContent: `decode error: ${error instanceof Error ? error.message : error}`,
          }),
        );
        rfb.close();
        return;
      }
      if (rects.length) updates += 1;
      const wait = REQUEST_INTERVAL_MS - (performance.now() - lastRequest);
      if (wait > 0) await new Promise((resolve) => setTimeout(resolve, wait));
      lastRequest = performance.now();
      rfb.requestUpdate(true);
    }
  })();

  // --- pointer & keyboard ----------------------------------------------------
  const toDevice = (event: MouseEvent): [number, number] => {
    const box = canvas.getBoundingClientRect();
    const x = Math.round(((event.clientX - box.left) / box.width) * rfb.width);
    const y = Math.round(((event.clientY - box.top) / box.height) * rfb.height);
    return [Math.min(Math.max(x, 0), rfb.width - 1), Math.min(Math.max(y, 0), rfb.height - 1)];
  };

  let buttons = 0;
  overlay.onmousedown = (event) => {
    const [x, y] = toDevice(event);
    if (composer.armed) {
      composer.startStroke(x, y, performance.now());
      redrawOverlay();
      return;
    }
    buttons |= 1 << event.button;
    rfb.pointerEvent(x, y, buttons);
  };
  overlay.onmousemove = (event) => {
    const [x, y] = toDevice(event);
    if (composer.armed) {
      composer.moveStroke(x, y, performance.now());
      redrawOverlay();
      return;
    }
    if (buttons) rfb.pointerEvent(x, y, buttons);
  };
  overlay.onmouseup = (event) => {
    const [x, y] = toDevice(event);
    if (composer.armed) {
      composer.endStroke(x, y, performance.now());
      redrawOverlay();
      return;
    }
    buttons &= ~(1 << event.button);
    rfb.pointerEvent(x, y, buttons);
  };
  window.onkeydown = (event) => {
    if (document.activeElement instanceof HTMLInputElement) return;
    rfb.keyEvent(event.key.length === 1 ? event.key.charCodeAt(0) : 0xff0d, true);
  };
  window.onkeyup = (event) => {
    if (document.activeElement instanceof HTMLInputElement) return;
    rfb.keyEvent(event.key.length === 1 ? event.key.charCodeAt(0) : 0xff0d, false);
  };

  for (const [id, keysym] of [
    ["btn-back", KEY_BACK],
    ["btn-home", KEY_HOME],
    ["btn-menu", KEY_MENU],
  ] as const) {
    byId<HTMLButtonElement>(id).onclick = () => {
      rfb.keyEvent(keysym, true);
      rfb.keyEvent(keysym, false);
    };
  }

  // --- composite gesture composer -------------------------------------------
  const armButton = byId<HTMLButtonElement>("btn-compose");
  const sendButton = byId<HTMLButtonElement>("btn-send-gesture");
  const clearButton = byId<HTMLButtonElement>("btn-clear-gesture");

  function redrawOverlay(): void {
    overlayCtx.clearRect(0, 0, overlay.width, overlay.height);
    if (composer.armed) composer.drawPreview(overlayCtx, 1);
    sendButton.disabled = composer.isEmpty;
  }

  armButton.onclick = () => {
    composer.armed = !composer.armed;
    armButton.classList.toggle("active", composer.armed);
    redrawOverlay();
  };
  clearButton.onclick = () => {
    composer.clear();
    redrawOverlay();
  };
  sendButton.onclick = async () => {
    if (composer.isEmpty) return;
    const { tracks, durationMs } = composer.buildTracks();
    const group = await cmd.compositeInput(tracks, durationMs);
    statusPanel.notify(`gesture delivered as group ${group} (${tracks.length} tracks)`);
    composer.clear();
    composer.armed = false;
    armButton.classList.remove("active");
    redrawOverlay();
  };
  sendButton.disabled = true;
}

byId<HTMLButtonElement>("btn-connect").onclick = async () => {
  const secret = byId<HTMLInputElement>("login-secret").value || null;
  const errorBox = byId<HTMLDivElement>("login-error");
  errorBox.textContent = "";
  try {
    await connect(secret);
  } catch (error) {
    errorBox.textContent = error instanceof Error ? error.message : String(error);
  }
};
