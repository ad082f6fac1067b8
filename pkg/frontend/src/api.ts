/** Thin typed client over the service HTTP API. */

import {
  AnnotationDoc,
  AnnotationRecord,
  Channel,
  SessionEntry,
  SignalPayload,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public body: unknown = null,
  ) {
    super(message);
  }
}

export class StaleRevisionError extends ApiError {
  constructor(public currentRevision: number, body: unknown) {
    super(409, `stale revision; current is ${currentRevision}`, body);
  }
}

type Fetcher = typeof fetch;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetcher: Fetcher = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetcher(this.base + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      /* non-JSON body (e.g. empty) */
    }
    if (!resp.ok) {
      const message =
        (body as { error?: string } | null)?.error ?? `HTTP ${resp.status}`;
      if (resp.status === 409) {
        const current = (body as { current_revision?: number })
          ?.current_revision;
        throw new StaleRevisionError(current ?? -1, body);
      }
      throw new ApiError(resp.status, message, body);
    }
    return body;
  }

  async listSessions(): Promise<SessionEntry[]> {
    const body = (await this.request("/api/sessions")) as {
      sessions: SessionEntry[];
    };
    return body.sessions;
  }

  getSession(id: string): Promise<SessionEntry> {
    return this.request(`/api/sessions/${id}`) as Promise<SessionEntry>;
  }

  getSignal(
    id: string,
    channel: Channel,
    opts: { from?: number; to?: number; decimate?: number } = {},
  ): Promise<SignalPayload> {
    const params = new URLSearchParams({ channel });
    if (opts.from !== undefined) params.set("from", String(opts.from));
    if (opts.to !== undefined) params.set("to", String(opts.to));
    if (opts.decimate !== undefined)
      params.set("decimate", String(opts.decimate));
    return this.request(
      `/api/sessions/${id}/signal?${params}`,
    ) as Promise<SignalPayload>;
  }

  getAnnotations(id: string): Promise<AnnotationRecord> {
    return this.request(
      `/api/sessions/${id}/annotations`,
    ) as Promise<AnnotationRecord>;
  }

  putAnnotations(
    id: string,
    doc: AnnotationDoc,
    revision: number,
  ): Promise<AnnotationRecord> {
    return this.request(`/api/sessions/${id}/annotations`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ revision, doc }),
    }) as Promise<AnnotationRecord>;
  }

  startMonitor(
    session: string,
    modelId: string,
    opts: { debounce_n?: number; speed?: number | "inf" } = {},
  ): Promise<unknown> {
    return this.request("/api/monitor/start", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session, model_id: modelId, ...opts }),
    });
  }

  stopMonitor(): Promise<unknown> {
    return this.request("/api/monitor/stop", { method: "POST" });
  }
}
