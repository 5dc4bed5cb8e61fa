/** Canvas drawing of the projected 3D box overlay.
 *
 * The corner pixel coordinates come verbatim from the service; this
 * module never projects or transforms geometry itself.
 */

import type { Overlay } from "./types.js";

export interface OverlayStyle {
  stroke: string;
  cornerFill: string;
  lineWidth: number;
  cornerRadius: number;
}

export const KEYFRAME_STYLE: OverlayStyle = {
  stroke: "#3fb950",
  cornerFill: "#3fb950",
  lineWidth: 2,
  cornerRadius: 3,
};

export const PROPAGATED_STYLE: OverlayStyle = {
  stroke: "#d29922",
  cornerFill: "#d29922",
  lineWidth: 1.5,
  cornerRadius: 2.5,
};

export const PREVIEW_STYLE: OverlayStyle = {
  stroke: "#58a6ff",
  cornerFill: "#58a6ff",
  lineWidth: 2,
  cornerRadius: 3,
};

export function styleFor(overlay: Overlay): OverlayStyle {
  return overlay.is_keyframe ? KEYFRAME_STYLE : PROPAGATED_STYLE;
}

/** Edges drawn for an overlay: both endpoints must be in front of the
 * camera, otherwise the segment is clipped out entirely. */
export function visibleEdges(overlay: Overlay): [number, number][] {
  return overlay.edges.filter(([a, b]) => !overlay.behind_camera[a] && !overlay.behind_camera[b]);
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  overlay: Overlay,
  style: OverlayStyle = styleFor(overlay),
): void {
  ctx.save();
  ctx.strokeStyle = style.stroke;
  ctx.lineWidth = style.lineWidth;
  ctx.beginPath();
  for (const [a, b] of visibleEdges(overlay)) {
    const pa = overlay.corners[a];
    const pb = overlay.corners[b];
    if (pa === undefined || pb === undefined) continue;
    ctx.moveTo(pa[0], pa[1]);
    ctx.lineTo(pb[0], pb[1]);
  }
  ctx.stroke();
  ctx.fillStyle = style.cornerFill;
  for (let i = 0; i < overlay.corners.length; i++) {
    if (overlay.behind_camera[i]) continue;
    const p = overlay.corners[i];
    if (p === undefined) continue;
    ctx.beginPath();
    ctx.arc(p[0], p[1], style.cornerRadius, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.restore();
}
