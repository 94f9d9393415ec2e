// Studio entry point: load the session, wire the paint canvas, the
// material gallery and undo. All pixel truth comes from the service; the
// client only overlays gesture arrows while a request is pending.

import { EditServiceClient, ServiceError } from "./api.js";
import { DEFAULT_BRUSH, gestureToStroke, maskFromImageData } from "./brush.js";
import type { MaskView } from "./brush.js";
import { EditHistory } from "./history.js";

const params = new URLSearchParams(window.location.search);
const SESSION = params.get("session") ?? "demo";
const BASE = params.get("service") ?? "";

const client = new EditServiceClient(BASE, SESSION);
const history = new EditHistory(client);
const brush = { ...DEFAULT_BRUSH };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  parent: HTMLElement,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text) node.textContent = text;
  parent.append(node);
  return node;
}

function pngUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

async function loadPng(b64: string): Promise<HTMLImageElement> {
  const img = new Image();
  img.src = pngUrl(b64);
  await img.decode();
  return img;
}

async function boot(): Promise<void> {
  const root = el("div", document.body);
  root.className = "studio";
  el("h1", root, `reflectance-map studio - session ${SESSION}`);
  const banner = el("div", root);
  banner.className = "banner";

  let info;
  try {
    info = await client.sessionInfo();
  } catch (e) {
    banner.textContent = `service unreachable: ${(e as Error).message}`;
    return;
  }

  const stage = el("div", root);
  stage.className = "stage";
  const canvas = el("canvas", stage);
  canvas.width = info.width;
  canvas.height = info.height;
  const ctx = canvas.getContext("2d")!;

  const sphere = el("img", stage);
  sphere.src = pngUrl(info.rm_png);
  sphere.title = "current reflectance map";

  // object mask from the normals preview (background renders pure black)
  const normalsImg = await loadPng(info.normals_png);
  const maskCanvas = document.createElement("canvas");
  maskCanvas.width = info.width;
  maskCanvas.height = info.height;
  const maskCtx = maskCanvas.getContext("2d")!;
  maskCtx.drawImage(normalsImg, 0, 0);
  const mask: MaskView = maskFromImageData(
    maskCtx.getImageData(0, 0, info.width, info.height),
  );

  let baseImage = await loadPng(info.image_png);
  const redraw = () => ctx.drawImage(baseImage, 0, 0);
  redraw();

  history.onChange(async (state) => {
    if (state.previewPng) {
      baseImage = await loadPng(state.previewPng);
      redraw();
    }
  });

  // controls
  const controls = el("div", root);
  controls.className = "controls";
  const radius = el("input", controls);
  radius.type = "range";
  radius.min = "4";
  radius.max = "40";
  radius.value = String(brush.radius);
  radius.oninput = () => (brush.radius = Number(radius.value));
  el("span", controls, "brush radius");
  const undoButton = el("button", controls, "undo");
  undoButton.onclick = () => void history.undo().catch(showError);

  function showError(e: unknown): void {
    banner.textContent = e instanceof ServiceError ? `service: ${e.message}` : String(e);
    setTimeout(() => (banner.textContent = ""), 4000);
  }

  // gesture capture: drag = tilt direction + magnitude
  let down: { x: number; y: number } | null = null;
  canvas.onpointerdown = (ev) => {
    down = { x: ev.offsetX, y: ev.offsetY };
  };
  canvas.onpointermove = (ev) => {
    if (!down) return;
    redraw();
    ctx.strokeStyle = "#ff5050";
    ctx.beginPath();
    ctx.moveTo(down.x, down.y);
    ctx.lineTo(ev.offsetX, ev.offsetY);
    ctx.stroke();
  };
  canvas.onpointerup = (ev) => {
    if (!down) return;
    const gesture = { x0: down.x, y0: down.y, x1: ev.offsetX, y1: ev.offsetY };
    down = null;
    const result = gestureToStroke(gesture, brush, mask, info.height);
    if (result.kind === "empty") {
      redraw();
      return;
    }
    if (result.kind === "outside-mask") {
      banner.textContent = "stroke starts outside the object";
      setTimeout(() => (banner.textContent = ""), 1500);
      redraw();
      return;
    }
    void history.paint([result.payload]).catch(showError);
  };

  // material gallery: lit-sphere thumbnails, click to transfer
  const gallery = el("div", root);
  gallery.className = "gallery";
  el("span", gallery, "materials:");
  for (const rmId of info.rm_ids) {
    const thumb = el("img", gallery);
    thumb.title = rmId;
    client
      .rmThumbnail(rmId)
      .then((png) => (thumb.src = pngUrl(png)))
      .catch(() => thumb.remove());
    thumb.onclick = () =>
      void client
        .transfer(rmId)
        .then(async (png) => {
          baseImage = await loadPng(png);
          redraw();
        })
        .catch(showError);
  }
}

void boot();
