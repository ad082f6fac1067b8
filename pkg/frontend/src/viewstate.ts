/** Pure view-state logic for the annotator: visible range, channel
 * overlays, staged annotation edits with revision tracking, and the live
 * monitor readout.  All transitions are pure functions so the state is
 * directly testable; the DOM layer only renders it.
 */

import { validateAnnotationDoc } from "./validate";
import {
  AnnotationDoc,
  ArtifactReason,
  Channel,
  HydrationLevel,
  MonitorEvent,
} from "./types";

export interface ViewState {
  sessionId: string | null;
  /** Visible time range in session seconds. */
  view: { from: number; to: number };
  /** Full session extent, set on load. */
  extent: { from: number; to: number };
  overlays: Record<Channel, boolean>;
  /** Staged annotation document (not yet saved). */
  doc: AnnotationDoc;
  /** Revision of the last loaded/saved document. */
  revision: number;
  dirty: boolean;
  monitor: {
    connection: "connecting" | "open" | "ended" | "closed";
    level: HydrationLevel | null;
    confidence: number | null;
    alerts: MonitorEvent[];
    streamTime: number | null;
  };
}

export const EMPTY_DOC: AnnotationDoc = {
  v: 1,
  initial_level: 0,
  transitions: [],
  artifacts: [],
};

export function initialState(): ViewState {
  return {
    sessionId: null,
    view: { from: 0, to: 60 },
    extent: { from: 0, to: 60 },
    overlays: {
      raw: true,
      filtered: false,
      tonic: false,
      phasic: false,
      driver: false,
    },
    doc: EMPTY_DOC,
    revision: 0,
    dirty: false,
    monitor: {
      connection: "closed",
      level: null,
      confidence: null,
      alerts: [],
      streamTime: null,
    },
  };
}

export function loadSession(
  state: ViewState,
  sessionId: string,
  startTime: number,
  duration: number,
  doc: AnnotationDoc,
  revision: number,
): ViewState {
  const extent = { from: startTime, to: startTime + duration };
  return {
    ...state,
    sessionId,
    extent,
    view: { ...extent },
    doc,
    revision,
    dirty: false,
  };
}

export function toggleOverlay(state: ViewState, channel: Channel): ViewState {
  return {
    ...state,
    overlays: { ...state.overlays, [channel]: !state.overlays[channel] },
  };
}

/** Zoom about a focus point; the view never escapes the session extent. */
export function zoom(state: ViewState, factor: number, focus: number): ViewState {
  const { from, to } = state.view;
  const span = (to - from) * factor;
  const minSpan = 1.0;
  const clampedSpan = Math.max(
    minSpan,
    Math.min(span, state.extent.to - state.extent.from),
  );
  const rel = (focus - from) / (to - from);
  let newFrom = focus - rel * clampedSpan;
  let newTo = newFrom + clampedSpan;
  if (newFrom < state.extent.from) {
    newFrom = state.extent.from;
    newTo = newFrom + clampedSpan;
  }
  if (newTo > state.extent.to) {
    newTo = state.extent.to;
    newFrom = newTo - clampedSpan;
  }
  return { ...state, view: { from: newFrom, to: newTo } };
}

export function pan(state: ViewState, deltaSeconds: number): ViewState {
  const span = state.view.to - state.view.from;
  let from = state.view.from + deltaSeconds;
  from = Math.max(state.extent.from, Math.min(from, state.extent.to - span));
  return { ...state, view: { from, to: from + span } };
}

// -- staged annotation edits --------------------------------------------------

export interface EditResult {
  state: ViewState;
  errors: string[];
}

function staged(state: ViewState, doc: AnnotationDoc): EditResult {
  const errors = validateAnnotationDoc(doc);
  if (errors.length > 0) {
    return { state, errors };
  }
  return { state: { ...state, doc, dirty: true }, errors: [] };
}

export function placeTransition(
  state: ViewState,
  t: number,
  level: HydrationLevel,
): EditResult {
  const transitions = [...state.doc.transitions, { t, level }].sort(
    (a, b) => a.t - b.t,
  );
  return staged(state, { ...state.doc, transitions });
}

export function removeTransition(state: ViewState, index: number): EditResult {
  const transitions = state.doc.transitions.filter((_, i) => i !== index);
  return staged(state, { ...state.doc, transitions });
}

export function setInitialLevel(
  state: ViewState,
  level: HydrationLevel,
): EditResult {
  return staged(state, { ...state.doc, initial_level: level });
}

export function addArtifact(
  state: ViewState,
  tStart: number,
  tEnd: number,
  reason: ArtifactReason = "movement",
): EditResult {
  const artifacts = [
    ...state.doc.artifacts,
    { t_start: Math.min(tStart, tEnd), t_end: Math.max(tStart, tEnd), reason },
  ].sort((a, b) => a.t_start - b.t_start);
  return staged(state, { ...state.doc, artifacts });
}

export function removeArtifact(state: ViewState, index: number): EditResult {
  const artifacts = state.doc.artifacts.filter((_, i) => i !== index);
  return staged(state, { ...state.doc, artifacts });
}

/** After a successful PUT: adopt the server's record. */
export function saved(
  state: ViewState,
  doc: AnnotationDoc,
  revision: number,
): ViewState {
  return { ...state, doc, revision, dirty: false };
}

/** Live-session annotation: timestamp a transition at current stream time. */
export function markTransitionNow(
  state: ViewState,
  level: HydrationLevel,
): EditResult {
  const t = state.monitor.streamTime;
  if (t === null) {
    return { state, errors: ["no live stream time available"] };
  }
  return placeTransition(state, t, level);
}

// -- monitor ------------------------------------------------------------------

export function monitorEvent(state: ViewState, event: MonitorEvent): ViewState {
  const monitor = { ...state.monitor, streamTime: event.time };
  if (event.type === "prediction") {
    monitor.level = event.level;
    monitor.confidence = event.confidence;
  } else {
    monitor.level = event.to_level;
    monitor.confidence = event.confidence;
    monitor.alerts = [...state.monitor.alerts, event];
  }
  return { ...state, monitor };
}

export function monitorConnection(
  state: ViewState,
  connection: ViewState["monitor"]["connection"],
): ViewState {
  return { ...state, monitor: { ...state.monitor, connection } };
}

/** High/low water-level cue for the live badge: hydrated side or not. */
export function waterLevelCue(level: HydrationLevel | null): "high" | "low" | "unknown" {
  if (level === null) return "unknown";
  return level <= 1 ? "high" : "low";
}
