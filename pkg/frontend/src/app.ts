/** Application shell: wires the API client, frame viewer, keyframe
 * editor, and propagation review together. All numeric display values
 * originate from service responses. */

import { ApiClient, ServiceError } from "./api.js";
import {
  EditorState,
  initEditor,
  saveKeyframe,
  setDial,
  setSize,
  setTranslation,
  validateDraft,
} from "./editor.js";
import { pollJob } from "./jobs.js";
import { drawOverlay, styleFor } from "./overlay.js";
import { DRIFT_COLORS, driftLevel, driftRms } from "./review.js";
import type { Overlay, PoseJson, VideoInfo } from "./types.js";

const client = new ApiClient();

interface AppState {
  videos: VideoInfo[];
  videoId: string | null;
  frame: number;
  frameCount: number;
  overlays: Map<number, Overlay>;
  unpropagated: number[];
  editor: EditorState | null;
  status: string;
}

const state: AppState = {
  videos: [],
  videoId: null,
  frame: 0,
  frameCount: 0,
  overlays: new Map(),
  unpropagated: [],
  editor: null,
  status: "",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("frame-canvas");
const ctx = ((): CanvasRenderingContext2D => {
  const c = canvas.getContext("2d");
  if (c === null) throw new Error("canvas 2d context unavailable");
  return c;
})();

function setStatus(text: string): void {
  el("status").textContent = text;
}

async function refreshOverlay(frame: number): Promise<Overlay | null> {
  if (state.videoId === null) return null;
  try {
    const overlay = await client.getOverlay(state.videoId, frame);
    state.overlays.set(frame, overlay);
    return overlay;
  } catch (err) {
    if (err instanceof ServiceError && err.status === 404) {
      state.overlays.delete(frame);
      return null;
    }
    throw err;
  }
}

async function drawFrame(): Promise<void> {
  if (state.videoId === null) return;
  const img = new Image();
  img.src = client.frameImageUrl(state.videoId, state.frame, "rgb");
  await img.decode();
  canvas.width = img.width;
  canvas.height = img.height;
  ctx.drawImage(img, 0, 0);
  const overlay = state.overlays.get(state.frame) ?? (await refreshOverlay(state.frame));
  const badge = el("frame-badge");
  if (overlay !== null && overlay !== undefined) {
    drawOverlay(ctx, overlay, styleFor(overlay));
    const prev = state.overlays.get(state.frame - 1);
    if (prev !== undefined && !overlay.is_keyframe) {
      const rms = driftRms(prev, overlay);
      const level = driftLevel(rms);
      badge.textContent = `drift ${rms.toFixed(1)} px`;
      badge.style.color = DRIFT_COLORS[level];
    } else {
      badge.textContent = overlay.is_keyframe ? "keyframe" : "propagated";
      badge.style.color = overlay.is_keyframe ? DRIFT_COLORS.ok : "";
    }
  } else if (state.unpropagated.includes(state.frame)) {
    badge.textContent = "unpropagated";
    badge.style.color = DRIFT_COLORS.alert;
  } else {
    badge.textContent = "no annotation";
    badge.style.color = "";
  }
}

function renderEditor(): void {
  const panel = el("editor-panel");
  const editor = state.editor;
  if (editor === null) {
    panel.classList.add("hidden");
    return;
  }
  panel.classList.remove("hidden");
  const errBox = el("editor-error");
  const err = editor.error ?? validateDraft(editor);
  errBox.textContent = err ?? "";
  errBox.classList.toggle("hidden", err === null);
  el<HTMLButtonElement>("save-keyframe").disabled = validateDraft(editor) !== null || !editor.dirty;
  for (let axis = 0; axis < 3; axis++) {
    el<HTMLSpanElement>(`dial-${axis}-value`).textContent = `${editor.dials[axis]?.toFixed(0)} deg`;
    el<HTMLSpanElement>(`trans-${axis}-value`).textContent = `${editor.translation[axis]?.toFixed(3)} m`;
    el<HTMLSpanElement>(`size-${axis}-value`).textContent = `${editor.size[axis]?.toFixed(3)} m`;
  }
}

async function openEditor(): Promise<void> {
  if (state.videoId === null) return;
  let pose: PoseJson;
  try {
    const poses = await client.getPoses(state.videoId);
    const existing = poses[String(state.frame)];
    pose = existing ?? {
      quaternion: [1, 0, 0, 0],
      translation_m: [0, 0, 0.5],
      size_m: [0.1, 0.1, 0.1],
      is_keyframe: true,
    };
  } catch {
    pose = { quaternion: [1, 0, 0, 0], translation_m: [0, 0, 0.5], size_m: [0.1, 0.1, 0.1], is_keyframe: true };
  }
  state.editor = initEditor(pose);
  syncEditorInputs();
  renderEditor();
}

function syncEditorInputs(): void {
  const editor = state.editor;
  if (editor === null) return;
  for (let axis = 0; axis < 3; axis++) {
    el<HTMLInputElement>(`dial-${axis}`).value = String(editor.dials[axis]);
    el<HTMLInputElement>(`trans-${axis}`).value = String(editor.translation[axis]);
    el<HTMLInputElement>(`size-${axis}`).value = String(editor.size[axis]);
  }
}

async function onSave(): Promise<void> {
  if (state.editor === null || state.videoId === null) return;
  const result = await saveKeyframe(client, state.videoId, state.frame, state.editor);
  state.editor = result.state;
  renderEditor();
  if (result.saved !== null) {
    setStatus(`keyframe ${state.frame} saved`);
    await refreshOverlay(state.frame);
    await drawFrame();
    await loadVideos();
  }
}

async function onPropagate(): Promise<void> {
  if (state.videoId === null) return;
  let jobId: string;
  try {
    jobId = await client.startPropagation(state.videoId);
  } catch (err) {
    if (err instanceof ServiceError) {
      setStatus(`propagation rejected: ${err.detail}`);
      return;
    }
    throw err;
  }
  const handle = pollJob(client, jobId, (job) => {
    setStatus(`propagation ${job.status} (${Math.round(job.progress * 100)}%)`);
  });
  const job = await handle.done;
  if (job.status === "failed") {
    setStatus(`propagation failed: ${job.error ?? "unknown error"}`);
    return;
  }
  state.unpropagated = job.unpropagated;
  state.overlays.clear();
  setStatus(
    job.unpropagated.length > 0
      ? `propagation done; ${job.unpropagated.length} frame(s) unpropagated`
      : "propagation done",
  );
  await drawFrame();
}

async function selectVideo(videoId: string): Promise<void> {
  const info = state.videos.find((v) => v.id === videoId);
  if (info === undefined) return;
  state.videoId = videoId;
  state.frame = 0;
  state.frameCount = info.frame_count;
  state.overlays.clear();
  state.unpropagated = [];
  state.editor = null;
  const slider = el<HTMLInputElement>("frame-slider");
  slider.max = String(info.frame_count - 1);
  slider.value = "0";
  renderEditor();
  await drawFrame();
}

async function loadVideos(): Promise<void> {
  state.videos = await client.listVideos();
  const list = el("video-list");
  list.replaceChildren();
  for (const video of state.videos) {
    const item = document.createElement("button");
    item.className = "video-item";
    item.textContent = `${video.id} (${video.category}, ${video.frame_count} frames, ${video.keyframe_count} keyframes)`;
    item.addEventListener("click", () => void selectVideo(video.id));
    list.appendChild(item);
  }
}

function bindInputs(): void {
  el<HTMLInputElement>("frame-slider").addEventListener("input", (ev) => {
    state.frame = Number((ev.target as HTMLInputElement).value);
    el("frame-label").textContent = `frame ${state.frame}`;
    void drawFrame();
  });
  el("edit-keyframe").addEventListener("click", () => void openEditor());
  el("save-keyframe").addEventListener("click", () => void onSave());
  el("propagate").addEventListener("click", () => void onPropagate());
  for (let axis = 0 as 0 | 1 | 2; axis < 3; axis++) {
    const a = axis;
    el<HTMLInputElement>(`dial-${a}`).addEventListener("input", (ev) => {
      if (state.editor === null) return;
      state.editor = setDial(state.editor, a, Number((ev.target as HTMLInputElement).value));
      renderEditor();
    });
    el<HTMLInputElement>(`trans-${a}`).addEventListener("input", (ev) => {
      if (state.editor === null) return;
      state.editor = setTranslation(state.editor, a, Number((ev.target as HTMLInputElement).value));
      renderEditor();
    });
    el<HTMLInputElement>(`size-${a}`).addEventListener("input", (ev) => {
      if (state.editor === null) return;
      state.editor = setSize(state.editor, a, Number((ev.target as HTMLInputElement).value));
      renderEditor();
    });
  }
}

bindInputs();
void loadVideos();
