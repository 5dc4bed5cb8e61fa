/** Propagation job polling at a fixed 500 ms cadence. */

import type { ApiClient } from "./api.js";
import type { Job } from "./types.js";

export const POLL_INTERVAL_MS = 500;

export interface PollHandle {
  done: Promise<Job>;
  cancel(): void;
}

type Scheduler = (fn: () => void, ms: number) => unknown;

/** Poll a job until it reaches a terminal state. `onUpdate` fires after
 * every poll, including the terminal one. The scheduler is injectable
 * so tests can drive the clock. */
export function pollJob(
  client: ApiClient,
  jobId: string,
  onUpdate: (job: Job) => void,
  schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
): PollHandle {
  let cancelled = false;
  const done = new Promise<Job>((resolve, reject) => {
    const tick = async () => {
      if (cancelled) return;
      let job: Job;
      try {
        job = await client.getJob(jobId);
      } catch (err) {
        reject(err);
        return;
      }
      if (cancelled) return;
      onUpdate(job);
      if (job.status === "done" || job.status === "failed") {
        resolve(job);
        return;
      }
      schedule(tick, POLL_INTERVAL_MS);
    };
    tick();
  });
  return {
    done,
    cancel: () => {
      cancelled = true;
    },
  };
}
