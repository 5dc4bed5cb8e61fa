/** JSON shapes of the annotation service responses.
 *
 * These mirror the service schema exactly; the UI never reshapes or
 * recomputes the numeric payloads, it only displays them.
 */

export interface VideoInfo {
  id: string;
  category: string;
  frame_count: number;
  keyframe_count: number;
}

export interface PoseJson {
  quaternion: [number, number, number, number];
  translation_m: [number, number, number];
  size_m: [number, number, number];
  is_keyframe: boolean;
}

export interface Overlay {
  corners: [number, number][];
  edges: [number, number][];
  behind_camera: boolean[];
  frame: number;
  is_keyframe: boolean;
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface Job {
  job_id: string;
  video_id: string;
  status: JobStatus;
  progress: number;
  error: string | null;
  unpropagated: number[];
}

export type PoseMap = Record<string, PoseJson>;

export interface ApiError {
  status: number;
  detail: string;
}
