/** Viewport-driven fetch planning.
 *
 * The UI never thins data itself — it asks the service for a decimated
 * slice sized to the viewport, keeping every payload under the point
 * budget while aligning coarse and fine fetches on shared timestamps.
 */

export const MAX_POINTS_PER_CHANNEL = 10_000;

/** Smallest decimation stride that keeps the slice under the budget. */
export function decimationFor(
  spanSeconds: number,
  rate: number,
  maxPoints: number = MAX_POINTS_PER_CHANNEL,
): number {
  const samples = Math.max(1, Math.ceil(spanSeconds * rate));
  return Math.max(1, Math.ceil(samples / maxPoints));
}

export interface FetchPlan {
  from: number;
  to: number;
  decimate: number;
}

/** Snap the viewport to the decimation grid so zoom levels share samples. */
export function planFetch(
  viewFrom: number,
  viewTo: number,
  t0: number,
  rate: number,
  maxPoints: number = MAX_POINTS_PER_CHANNEL,
): FetchPlan {
  const decimate = decimationFor(viewTo - viewFrom, rate, maxPoints);
  const step = decimate / rate;
  const from = t0 + Math.floor(Math.max(0, viewFrom - t0) / step) * step;
  return { from, to: viewTo, decimate };
}
