/** Keyframe editor state.
 *
 * Holds a draft pose assembled from the dial and slider inputs. The
 * draft only exists client-side; nothing reaches the server until Save
 * issues the PUT, and an invalid draft (non-positive depth) blocks the
 * PUT before any request is made. Quaternion assembly here is input
 * encoding for the request payload, not a reinterpretation of any
 * server value.
 */

import { ApiClient, ServiceError } from "./api.js";
import type { PoseJson } from "./types.js";

export type Quat = [number, number, number, number];

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) return [1, 0, 0, 0];
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

function axisQuat(axis: 0 | 1 | 2, deg: number): Quat {
  const h = (deg * Math.PI) / 360;
  const q: Quat = [Math.cos(h), 0, 0, 0];
  q[axis + 1] = Math.sin(h);
  return q;
}

/** Compose the three rotation dials (degrees about camera x, y, z)
 * on top of a base orientation. */
export function quatFromDials(base: Quat, dials: [number, number, number]): Quat {
  let q = base;
  q = quatMultiply(axisQuat(0, dials[0]), q);
  q = quatMultiply(axisQuat(1, dials[1]), q);
  q = quatMultiply(axisQuat(2, dials[2]), q);
  return quatNormalize(q);
}

export interface EditorState {
  base: PoseJson;
  dials: [number, number, number];
  translation: [number, number, number];
  size: [number, number, number];
  dirty: boolean;
  saving: boolean;
  error: string | null;
}

export function initEditor(pose: PoseJson): EditorState {
  return {
    base: pose,
    dials: [0, 0, 0],
    translation: [...pose.translation_m],
    size: [...pose.size_m],
    dirty: false,
    saving: false,
    error: null,
  };
}

export function draftPose(state: EditorState): PoseJson {
  return {
    quaternion: quatFromDials(state.base.quaternion, state.dials),
    translation_m: [...state.translation],
    size_m: [...state.size],
    is_keyframe: true,
  };
}

export function setDial(state: EditorState, axis: 0 | 1 | 2, deg: number): EditorState {
  const dials: [number, number, number] = [...state.dials];
  dials[axis] = deg;
  return { ...state, dials, dirty: true, error: null };
}

export function setTranslation(state: EditorState, axis: 0 | 1 | 2, value: number): EditorState {
  const translation: [number, number, number] = [...state.translation];
  translation[axis] = value;
  return { ...state, translation, dirty: true, error: null };
}

export function setSize(state: EditorState, axis: 0 | 1 | 2, value: number): EditorState {
  const size: [number, number, number] = [...state.size];
  size[axis] = Math.max(value, 1e-6);
  return { ...state, size, dirty: true, error: null };
}

/** Client-side gate: a draft with non-positive depth must never be PUT. */
export function validateDraft(state: EditorState): string | null {
  if (state.translation[2] <= 0) return "depth t_z must be > 0";
  return null;
}

export interface SaveResult {
  state: EditorState;
  saved: PoseJson | null;
}

/** Save the draft. Validation failures and service 422s land in
 * `state.error` for inline display; no request is made when the
 * client-side check fails. */
export async function saveKeyframe(
  client: ApiClient,
  videoId: string,
  frame: number,
  state: EditorState,
): Promise<SaveResult> {
  const invalid = validateDraft(state);
  if (invalid !== null) {
    return { state: { ...state, error: invalid }, saved: null };
  }
  try {
    const saved = await client.putKeyframe(videoId, frame, draftPose(state));
    return { state: initEditor(saved), saved };
  } catch (err) {
    if (err instanceof ServiceError) {
      return { state: { ...state, saving: false, error: err.detail }, saved: null };
    }
    throw err;
  }
}
