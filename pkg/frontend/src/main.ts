/** DOM wiring: renders the ViewState and routes user input through the
 * pure state-transition functions.  Signal values are always fetched from
 * the service; the client performs no signal processing. */

import { ApiClient, StaleRevisionError } from "./api";
import {
  CHANNEL_COLORS,
  PlotBox,
  polylinePoints,
  toScreenT,
  toScreenX,
  yRange,
} from "./chart";
import { planFetch } from "./decimate";
import { MonitorFeed } from "./sse";
import { Channel, LEVEL_NAMES, SignalPayload } from "./types";
import { levelAt, validateAnnotationDoc } from "./validate";
import * as vs from "./viewstate";

const CHANNELS: Channel[] = ["raw", "filtered", "tonic", "phasic", "driver"];
const WIDTH = 900;
const HEIGHT = 320;
const STRIP_HEIGHT = 26;

const api = new ApiClient();
let state = vs.initialState();
let payloads = new Map<Channel, SignalPayload>();
let banner: string | null = null;
let feed: MonitorFeed | null = null;

const root = document.getElementById("app");

function setState(next: vs.ViewState): void {
  state = next;
  render();
}

async function refetchVisible(): Promise<void> {
  if (!state.sessionId) return;
  const session = await api.getSession(state.sessionId);
  const plan = planFetch(
    state.view.from,
    state.view.to,
    session.start_time,
    session.rate,
  );
  const next = new Map<Channel, SignalPayload>();
  for (const channel of CHANNELS) {
    if (!state.overlays[channel]) continue;
    next.set(
      channel,
      await api.getSignal(state.sessionId, channel, {
        from: plan.from,
        to: plan.to,
        decimate: plan.decimate,
      }),
    );
  }
  payloads = next;
  banner = null;
  render();
}

async function guarded(work: () => Promise<void>): Promise<void> {
  try {
    await work();
  } catch (err) {
    banner = err instanceof Error ? err.message : String(err);
    render();
  }
}

async function openSession(id: string): Promise<void> {
  const session = await api.getSession(id);
  const ann = await api.getAnnotations(id);
  setState(
    vs.loadSession(
      state,
      id,
      session.start_time,
      session.duration,
      ann.doc,
      ann.revision,
    ),
  );
  await refetchVisible();
}

async function saveAnnotations(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const record = await api.putAnnotations(
      state.sessionId,
      state.doc,
      state.revision,
    );
    setState(vs.saved(state, record.doc, record.revision));
    await refetchVisible(); // corrected spans change the filtered channel
  } catch (err) {
    if (err instanceof StaleRevisionError) {
      banner = `Annotations changed elsewhere (revision ${err.currentRevision}). Reload to merge.`;
      render();
      return;
    }
    throw err;
  }
}

function startMonitorFeed(): void {
  feed?.close();
  feed = new MonitorFeed();
  feed.onState((connection) => setState(vs.monitorConnection(state, connection)));
  feed.onEvent((event) => setState(vs.monitorEvent(state, event)));
  feed.connect();
}

// -- rendering ----------------------------------------------------------------

function h(tag: string, attrs: Record<string, string>, children: (Node | string)[] = []): HTMLElement {
  const el = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  for (const c of children) el.append(c);
  return el;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const el = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

function renderChart(): SVGElement {
  const visible = [...payloads.values()];
  const { yMin, yMax } = yRange(visible);
  const box: PlotBox = {
    width: WIDTH,
    height: HEIGHT,
    tFrom: state.view.from,
    tTo: state.view.to,
    yMin,
    yMax,
  };
  const svg = svgEl("svg", {
    width: String(WIDTH),
    height: String(HEIGHT + STRIP_HEIGHT),
    id: "chart",
  });
  // artifact spans as shaded regions
  for (const span of state.doc.artifacts) {
    const x0 = Math.max(0, toScreenX(box, span.t_start));
    const x1 = Math.min(WIDTH, toScreenX(box, span.t_end));
    if (x1 <= 0 || x0 >= WIDTH) continue;
    svg.append(
      svgEl("rect", {
        x: String(x0),
        y: "0",
        width: String(Math.max(1, x1 - x0)),
        height: String(HEIGHT),
        fill: "rgba(255,165,0,0.25)",
        class: "artifact-span",
      }),
    );
  }
  for (const [channel, payload] of payloads) {
    svg.append(
      svgEl("polyline", {
        points: polylinePoints(box, payload),
        fill: "none",
        stroke: CHANNEL_COLORS[channel],
        "stroke-width": "1",
        class: `channel-${channel}`,
      }),
    );
  }
  // hydration step strip under the chart
  const strip = svgEl("g", { class: "level-strip" });
  const stripColors = ["#2e7d32", "#9e9d24", "#ef6c00", "#c62828"];
  const edges = [
    state.view.from,
    ...state.doc.transitions
      .map((tr) => tr.t)
      .filter((t) => t > state.view.from && t < state.view.to),
    state.view.to,
  ];
  for (let i = 0; i + 1 < edges.length; i++) {
    const mid = (edges[i] + edges[i + 1]) / 2;
    const lv = levelAt(state.doc, mid);
    strip.append(
      svgEl("rect", {
        x: String(toScreenX(box, edges[i])),
        y: String(HEIGHT + 2),
        width: String(toScreenX(box, edges[i + 1]) - toScreenX(box, edges[i])),
        height: String(STRIP_HEIGHT - 4),
        fill: stripColors[lv],
      }),
    );
  }
  svg.append(strip);
  svg.addEventListener("dblclick", (ev) => {
    const rect = (svg as unknown as HTMLElement).getBoundingClientRect();
    const t = toScreenT(box, ev.clientX - rect.left);
    const picker = document.getElementById("level-picker") as HTMLSelectElement;
    const result = vs.placeTransition(
      state,
      t,
      Number(picker.value) as 0 | 1 | 2 | 3,
    );
    if (result.errors.length > 0) {
      banner = result.errors.join("; ");
      render();
    } else {
      setState(result.state);
    }
  });
  svg.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const rect = (svg as unknown as HTMLElement).getBoundingClientRect();
    const t = toScreenT(box, ev.clientX - rect.left);
    setState(vs.zoom(state, ev.deltaY > 0 ? 1.25 : 0.8, t));
    void guarded(refetchVisible);
  });
  return svg;
}

function render(): void {
  if (!root) return;
  root.replaceChildren();

  if (banner) {
    const retry = h("button", { id: "retry" }, ["Retry"]);
    retry.addEventListener("click", () => void guarded(refetchVisible));
    root.append(h("div", { class: "banner", role: "alert" }, [banner, retry]));
  }

  // session picker
  const picker = h("div", { class: "toolbar" });
  const select = h("select", { id: "session-select" }) as HTMLSelectElement;
  select.addEventListener("change", () =>
    void guarded(() => openSession(select.value)),
  );
  picker.append(select);
  void guarded(async () => {
    const sessions = await api.listSessions();
    select.replaceChildren(
      h("option", { value: "" }, ["choose a session"]),
      ...sessions.map((s) =>
        h("option", { value: s.id }, [`${s.id} (${s.subject})`]),
      ),
    );
    if (state.sessionId) select.value = state.sessionId;
  });

  // channel toggles
  for (const channel of CHANNELS) {
    const label = h("label", { class: "toggle" });
    const box = h("input", {
      type: "checkbox",
      id: `toggle-${channel}`,
    }) as HTMLInputElement;
    box.checked = state.overlays[channel];
    box.addEventListener("change", () => {
      setState(vs.toggleOverlay(state, channel));
      void guarded(refetchVisible);
    });
    label.append(box, channel);
    picker.append(label);
  }

  // annotation controls
  const levelPicker = h("select", { id: "level-picker" }) as HTMLSelectElement;
  ([0, 1, 2, 3] as const).forEach((lv) =>
    levelPicker.append(h("option", { value: String(lv) }, [LEVEL_NAMES[lv]])),
  );
  const save = h("button", { id: "save" }, [
    state.dirty ? "Save annotations *" : "Save annotations",
  ]);
  save.addEventListener("click", () => void guarded(saveAnnotations));
  const markNow = h("button", { id: "mark-now" }, ["Mark transition now"]);
  markNow.addEventListener("click", () => {
    const result = vs.markTransitionNow(
      state,
      Number(levelPicker.value) as 0 | 1 | 2 | 3,
    );
    if (result.errors.length > 0) {
      banner = result.errors.join("; ");
      render();
    } else {
      setState(result.state);
    }
  });
  picker.append(levelPicker, save, markNow);
  root.append(picker);

  // inline validation of the staged document
  const problems = validateAnnotationDoc(state.doc);
  if (problems.length > 0) {
    root.append(h("div", { class: "inline-error" }, [problems.join("; ")]));
  }

  if (state.sessionId) root.append(renderChart());

  // live monitor panel
  const cue = vs.waterLevelCue(state.monitor.level);
  const badge = h(
    "div",
    { id: "level-badge", class: `badge badge-${cue}` },
    [
      state.monitor.level === null
        ? "no signal"
        : `${LEVEL_NAMES[state.monitor.level]} (${(
            (state.monitor.confidence ?? 0) * 100
          ).toFixed(0)}%)`,
    ],
  );
  const conn = h("span", { id: "conn-state" }, [state.monitor.connection]);
  const startBtn = h("button", { id: "monitor-connect" }, ["Connect feed"]);
  startBtn.addEventListener("click", () => startMonitorFeed());
  const alerts = h(
    "ul",
    { id: "alert-feed" },
    state.monitor.alerts.map((a) =>
      h("li", {}, [
        a.type === "alert" ? `${a.time.toFixed(0)}s  ${a.message}` : "",
      ]),
    ),
  );
  root.append(
    h("div", { class: "monitor" }, [
      badge,
      conn,
      startBtn,
      h("p", { class: "note" }, [
        "Events missed while reconnecting are not replayed.",
      ]),
      alerts,
    ]),
  );
}

render();
