/** Reconnecting server-sent-events subscription for the live monitor.
 *
 * Drops reconnect with exponential backoff; events missed while
 * disconnected are not replayed (the feed is live-only by design).
 */

import { MonitorEvent } from "./types";

export type ConnectionState = "connecting" | "open" | "ended" | "closed";

export interface MonitorFeedOptions {
  url?: string;
  baseDelayMs?: number;
  maxDelayMs?: number;
  /** Injectable for tests and non-browser environments. */
  eventSourceFactory?: (url: string) => EventSourceLike;
  /** Injectable timer for tests. */
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  addEventListener(type: string, handler: (ev: { data: string }) => void): void;
  close(): void;
}

export class MonitorFeed {
  state: ConnectionState = "closed";
  retries = 0;

  private source: EventSourceLike | null = null;
  private listeners: ((event: MonitorEvent) => void)[] = [];
  private stateListeners: ((state: ConnectionState) => void)[] = [];
  private readonly url: string;
  private readonly baseDelayMs: number;
  private readonly maxDelayMs: number;
  private readonly makeSource: (url: string) => EventSourceLike;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;

  constructor(opts: MonitorFeedOptions = {}) {
    this.url = opts.url ?? "/api/monitor/events";
    this.baseDelayMs = opts.baseDelayMs ?? 500;
    this.maxDelayMs = opts.maxDelayMs ?? 15_000;
    this.makeSource =
      opts.eventSourceFactory ??
      ((url) => new EventSource(url) as unknown as EventSourceLike);
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  onEvent(listener: (event: MonitorEvent) => void): void {
    this.listeners.push(listener);
  }

  onState(listener: (state: ConnectionState) => void): void {
    this.stateListeners.push(listener);
  }

  /** Delay before reconnect attempt n (0-based): base * 2^n, capped. */
  backoffDelay(attempt: number): number {
    return Math.min(this.baseDelayMs * 2 ** attempt, this.maxDelayMs);
  }

  connect(): void {
    this.setState("connecting");
    this.source = this.makeSource(this.url);
    this.source.onmessage = (ev) => {
      this.retries = 0;
      this.setState("open");
      let parsed: MonitorEvent;
      try {
        parsed = JSON.parse(ev.data);
      } catch {
        return; // ignore malformed frames
      }
      this.listeners.forEach((l) => l(parsed));
    };
    this.source.addEventListener("end", () => {
      // server finished the replay: terminal, do not reconnect
      this.close("ended");
    });
    this.source.onerror = () => {
      if (this.state === "ended" || this.state === "closed") return;
      this.source?.close();
      this.source = null;
      const delay = this.backoffDelay(this.retries);
      this.retries += 1;
      this.setState("connecting");
      this.setTimer(() => {
        if (this.state === "connecting") this.connect();
      }, delay);
    };
  }

  close(finalState: ConnectionState = "closed"): void {
    this.source?.close();
    this.source = null;
    this.setState(finalState);
  }

  private setState(state: ConnectionState): void {
    if (this.state === state) return;
    this.state = state;
    this.stateListeners.forEach((l) => l(state));
  }
}
