/** Wire types mirrored from the service API. */

export type HydrationLevel = 0 | 1 | 2 | 3;

export const LEVEL_NAMES: Record<HydrationLevel, string> = {
  0: "Well hydrated",
  1: "Hydrated",
  2: "Dehydrated",
  3: "Very dehydrated",
};

export const ARTIFACT_REASONS = ["movement", "device_off", "other"] as const;
export type ArtifactReason = (typeof ARTIFACT_REASONS)[number];

export interface Transition {
  t: number;
  level: HydrationLevel;
}

export interface ArtifactSpan {
  t_start: number;
  t_end: number;
  reason?: ArtifactReason;
}

export interface AnnotationDoc {
  v: 1;
  initial_level: HydrationLevel;
  transitions: Transition[];
  artifacts: ArtifactSpan[];
}

export interface AnnotationRecord {
  revision: number;
  doc: AnnotationDoc;
}

export interface SessionEntry {
  id: string;
  subject: string;
  rate: number;
  start_time: number;
  n_samples: number;
  duration: number;
}

export type Channel = "raw" | "filtered" | "tonic" | "phasic" | "driver";

export interface SignalPayload {
  channel: Channel;
  t0: number;
  rate: number;
  values: number[];
  cached?: boolean;
}

export interface PredictionEvent {
  type: "prediction";
  time: number;
  window_start: number;
  level: HydrationLevel;
  confidence: number;
}

export interface AlertEventMsg {
  type: "alert";
  time: number;
  from_level: HydrationLevel;
  to_level: HydrationLevel;
  confidence: number;
  message: string;
}

export type MonitorEvent = PredictionEvent | AlertEventMsg;
