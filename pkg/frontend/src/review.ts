/** Propagation review helpers.
 *
 * Drift is summarized as the RMS pixel displacement of the overlay
 * corners between consecutive frames, using the corner coordinates the
 * service returned (display arithmetic only, no pose math).
 */

import type { Overlay } from "./types.js";

export function driftRms(prev: Overlay, curr: Overlay): number {
  let sum = 0;
  let n = 0;
  for (let i = 0; i < curr.corners.length; i++) {
    const a = prev.corners[i];
    const b = curr.corners[i];
    if (a === undefined || b === undefined) continue;
    if (prev.behind_camera[i] || curr.behind_camera[i]) continue;
    const du = b[0] - a[0];
    const dv = b[1] - a[1];
    sum += du * du + dv * dv;
    n += 1;
  }
  return n === 0 ? 0 : Math.sqrt(sum / n);
}

export const DRIFT_WARN_PX = 4.0;
export const DRIFT_ALERT_PX = 12.0;

export type DriftLevel = "ok" | "warn" | "alert";

export function driftLevel(rms: number): DriftLevel {
  if (rms >= DRIFT_ALERT_PX) return "alert";
  if (rms >= DRIFT_WARN_PX) return "warn";
  return "ok";
}

export const DRIFT_COLORS: Record<DriftLevel, string> = {
  ok: "#3fb950",
  warn: "#d29922",
  alert: "#f85149",
};
