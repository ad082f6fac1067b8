/** Minimal SVG time-series rendering.  The UI computes nothing numerical
 * about the signal itself — it only maps service-provided samples into
 * screen coordinates. */

import { Channel, SignalPayload } from "./types";

export const CHANNEL_COLORS: Record<Channel, string> = {
  raw: "#888888",
  filtered: "#1f77b4",
  tonic: "#2ca02c",
  phasic: "#d62728",
  driver: "#9467bd",
};

export interface PlotBox {
  width: number;
  height: number;
  tFrom: number;
  tTo: number;
  yMin: number;
  yMax: number;
}

export function toScreenX(box: PlotBox, t: number): number {
  return ((t - box.tFrom) / (box.tTo - box.tFrom)) * box.width;
}

export function toScreenT(box: PlotBox, x: number): number {
  return box.tFrom + (x / box.width) * (box.tTo - box.tFrom);
}

function toScreenY(box: PlotBox, v: number): number {
  if (box.yMax === box.yMin) return box.height / 2;
  return box.height - ((v - box.yMin) / (box.yMax - box.yMin)) * box.height;
}

/** Y extent across all visible payloads with a 5% margin. */
export function yRange(payloads: SignalPayload[]): { yMin: number; yMax: number } {
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const p of payloads) {
    for (const v of p.values) {
      if (v < yMin) yMin = v;
      if (v > yMax) yMax = v;
    }
  }
  if (!Number.isFinite(yMin)) return { yMin: 0, yMax: 1 };
  const pad = (yMax - yMin || 1) * 0.05;
  return { yMin: yMin - pad, yMax: yMax + pad };
}

export function polylinePoints(box: PlotBox, payload: SignalPayload): string {
  const pts: string[] = [];
  payload.values.forEach((v, i) => {
    const t = payload.t0 + i / payload.rate;
    pts.push(`${toScreenX(box, t).toFixed(1)},${toScreenY(box, v).toFixed(1)}`);
  });
  return pts.join(" ");
}
