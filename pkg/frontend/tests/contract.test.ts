/** Contract tests against recorded service responses.
 *
 * The fixture file is generated by scripts/make_contract_fixtures.py in
 * the parent repository, which drives the real HTTP service through the
 * keyframe -> propagate -> overlay round trip and freezes every JSON
 * body. These tests replay those recordings through the typed client
 * and assert the numbers come out byte-identical, so any client-side
 * reshaping or recomputation of service values shows up as a diff.
 */

import { readFileSync } from "node:fs";
import path from "node:path";
import { describe, expect, it, vi } from "vitest";

import { ApiClient, ServiceError } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import type { Job, Overlay, PoseJson } from "../src/types.js";

interface Recorded {
  status: number;
  body: unknown;
  request_body?: unknown;
}

interface Fixtures {
  responses: Record<string, Recorded>;
  job_polls: Job[];
  job_id: string;
}

const fixtures: Fixtures = JSON.parse(
  readFileSync(path.join(__dirname, "fixtures", "contract.json"), "utf8"),
);

function respond(rec: Recorded): Response {
  return new Response(JSON.stringify(rec.body), {
    status: rec.status,
    headers: { "content-type": "application/json" },
  });
}

/** Fetch stub that serves the recorded responses and logs every call. */
function recordedFetch(): { fetch: FetchLike; calls: { url: string; init?: RequestInit }[] } {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetch: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const method = init?.method ?? "GET";
    const key = `${method} ${url}`;
    const rec = fixtures.responses[key] ?? fixtures.responses[`${key} (invalid)`];
    if (rec === undefined) throw new Error(`no recording for ${key}`);
    return respond(rec);
  };
  return { fetch, calls };
}

describe("recorded GET responses pass through the client unchanged", () => {
  const { fetch } = recordedFetch();
  const client = new ApiClient("", fetch);

  it("video list", async () => {
    expect(await client.listVideos()).toStrictEqual(fixtures.responses["GET /api/videos"]!.body);
  });

  it("keyframes", async () => {
    expect(await client.getKeyframes("vid0")).toStrictEqual(
      fixtures.responses["GET /api/videos/vid0/keyframes"]!.body,
    );
  });

  it("poses", async () => {
    expect(await client.getPoses("vid0")).toStrictEqual(
      fixtures.responses["GET /api/videos/vid0/poses"]!.body,
    );
  });

  it("every propagated frame overlay, to full float precision", async () => {
    for (let frame = 0; frame < 4; frame++) {
      const rec = fixtures.responses[`GET /api/videos/vid0/frames/${frame}/overlay`];
      expect(rec, `overlay recording for frame ${frame}`).toBeDefined();
      const overlay = await client.getOverlay("vid0", frame);
      expect(overlay).toStrictEqual(rec!.body);
      expect(overlay.corners).toHaveLength(8);
      expect(overlay.edges).toHaveLength(12);
    }
  });
});

describe("keyframe save", () => {
  it("PUTs the exact recorded payload and returns the service echo verbatim", async () => {
    const { fetch, calls } = recordedFetch();
    const client = new ApiClient("", fetch);
    const rec = fixtures.responses["PUT /api/videos/vid0/keyframes/0"]!;
    const saved = await client.putKeyframe("vid0", 0, rec.request_body as PoseJson);
    expect(saved).toStrictEqual(rec.body);
    const call = calls[0]!;
    expect(call.init?.method).toBe("PUT");
    expect(JSON.parse(call.init?.body as string)).toStrictEqual(rec.request_body);
  });

  it("surfaces the recorded 422 detail as a ServiceError", async () => {
    const { fetch } = recordedFetch();
    const client = new ApiClient("", fetch);
    const rec = fixtures.responses["PUT /api/videos/vid0/keyframes/1 (invalid)"]!;
    const err = await client
      .putKeyframe("vid0", 1, rec.request_body as PoseJson)
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(422);
    expect((err as ServiceError).detail).toBe((rec.body as { detail: string }).detail);
  });
});

describe("propagation round trip", () => {
  it("start -> poll -> done replays the recorded job states in order", async () => {
    const polls = [...fixtures.job_polls];
    const seen: Job[] = [];
    const fetch: FetchLike = async (url, init) => {
      if ((init?.method ?? "GET") === "POST") {
        return respond(fixtures.responses["POST /api/videos/vid0/propagate"]!);
      }
      expect(url).toBe(`/api/jobs/${fixtures.job_id}`);
      return respond({ status: 200, body: polls.shift() });
    };
    const client = new ApiClient("", fetch);
    const { pollJob } = await import("../src/jobs.js");
    const jobId = await client.startPropagation("vid0");
    expect(jobId).toBe(fixtures.job_id);
    const handle = pollJob(client, jobId, (job) => seen.push(job), (fn) => setTimeout(fn, 0));
    const final = await handle.done;
    expect(final.status).toBe("done");
    expect(final.unpropagated).toStrictEqual([]);
    expect(seen).toStrictEqual(fixtures.job_polls);
  });

  it("polls at a 500 ms cadence", async () => {
    vi.useFakeTimers();
    try {
      const statuses = ["queued", "running", "running", "done"];
      let i = 0;
      const fetch: FetchLike = async () =>
        respond({
          status: 200,
          body: {
            job_id: "j",
            video_id: "vid0",
            status: statuses[Math.min(i++, statuses.length - 1)],
            progress: 0,
            error: null,
            unpropagated: [],
          },
        });
      const { pollJob, POLL_INTERVAL_MS } = await import("../src/jobs.js");
      expect(POLL_INTERVAL_MS).toBe(500);
      const updates: string[] = [];
      const handle = pollJob(new ApiClient("", fetch), "j", (job) => updates.push(job.status));
      for (let step = 0; step < statuses.length; step++) {
        await vi.advanceTimersByTimeAsync(500);
      }
      const final = await handle.done;
      expect(final.status).toBe("done");
      expect(updates).toStrictEqual(statuses);
    } finally {
      vi.useRealTimers();
    }
  });
});
