/** Typed client for the annotation service HTTP API.
 *
 * The fetch implementation is injectable so contract tests can replay
 * recorded service responses and assert the client passes numbers
 * through untouched.
 */

import type { Job, Overlay, PoseJson, PoseMap, VideoInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

async function parseError(res: Response): Promise<never> {
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: string };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ServiceError(res.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.base + path);
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.getJson("/api/videos");
  }

  frameImageUrl(videoId: string, frame: number, kind: "rgb" | "depth" | "mask"): string {
    return `${this.base}/api/videos/${videoId}/frames/${frame}/${kind}`;
  }

  getOverlay(videoId: string, frame: number): Promise<Overlay> {
    return this.getJson(`/api/videos/${videoId}/frames/${frame}/overlay`);
  }

  getKeyframes(videoId: string): Promise<PoseMap> {
    return this.getJson(`/api/videos/${videoId}/keyframes`);
  }

  getPoses(videoId: string): Promise<PoseMap> {
    return this.getJson(`/api/videos/${videoId}/poses`);
  }

  async putKeyframe(videoId: string, frame: number, pose: PoseJson): Promise<PoseJson> {
    const res = await this.fetchImpl(`${this.base}/api/videos/${videoId}/keyframes/${frame}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(pose),
    });
    if (!res.ok) await parseError(res);
    return (await res.json()) as PoseJson;
  }

  async startPropagation(videoId: string): Promise<string> {
    const res = await this.fetchImpl(`${this.base}/api/videos/${videoId}/propagate`, {
      method: "POST",
    });
    if (!res.ok) await parseError(res);
    const body = (await res.json()) as { job_id: string };
    return body.job_id;
  }

  getJob(jobId: string): Promise<Job> {
    return this.getJson(`/api/jobs/${jobId}`);
  }
}
