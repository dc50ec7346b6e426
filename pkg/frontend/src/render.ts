/**
 * Pure SVG builders for the planner UI.
 *
 * Everything here returns strings, so rendering is unit-testable without a
 * browser. Hemodynamic numbers shown to the user are passed in as literal
 * tokens taken from the service response text (see rawjson.ts); this module
 * never formats an FFR value itself.
 */

import type { RawResponse } from "./api.js";
import { applyTransform, arcFromRoot, fitTransform, pathPoints, rootOf } from "./layout.js";
import type { XY } from "./layout.js";
import type { EvaluationResult, LesionInfo, PathTrace, PlanInterval, TreePoint } from "./types.js";

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Readout {
  pointId: string;
  /** FFR exactly as spelled in the service response. */
  token: string;
}

/**
 * Byte-exact FFR readouts for every evaluation point, in service order.
 * Throws if a token is missing — falling back to client-side formatting
 * would silently break the byte-equality guarantee.
 */
export function ffrReadouts(raw: RawResponse<EvaluationResult>): Readout[] {
  return raw.body.evaluation_points.map((p) => {
    const token = raw.numbers.get(`ffr_at_evaluation_points/${p}`);
    if (token === undefined) {
      throw new Error(`response has no literal FFR token for point ${p}`);
    }
    return { pointId: String(p), token };
  });
}

const COLOR_VESSEL = "#6b8aa5";
const COLOR_LESION = "#d9534f";
const COLOR_STAGED = "#2e8b57";
const COLOR_SELECTED = "#f5c744";
const COLOR_PRE = "#8a8a8a";
const COLOR_POST = "#1f5fa8";

export interface TreeRenderOptions {
  points: TreePoint[];
  layout: Map<number, XY>;
  width?: number;
  height?: number;
  /** Detected lesion windows to highlight. */
  lesions?: LesionInfo[];
  /** Staged plan intervals to highlight (drawn over lesion colour). */
  staged?: PlanInterval[];
  /** Point ids to mark as FFR evaluation points. */
  evaluationPoints?: number[];
  /** Emphasise the root-to-outlet path of this outlet id. */
  selectedPathId?: number | null;
}

interface ArcWindow {
  members: Set<number>;
  arcStart: number;
  arcEnd: number;
}

function windowsFor(
  points: TreePoint[],
  items: Array<{ path_id: number; arc_start: number; arc_end: number }>,
): ArcWindow[] {
  return items.map((item) => ({
    members: new Set(pathPoints(points, item.path_id)),
    arcStart: item.arc_start,
    arcEnd: item.arc_end,
  }));
}

function edgeInWindow(
  w: ArcWindow,
  childId: number,
  arcParent: number,
  arcChild: number,
): boolean {
  return w.members.has(childId) && arcChild >= w.arcStart && arcParent <= w.arcEnd;
}

/** Schematic tree: arc-length-true geometry, lumen-proportional strokes. */
export function renderTreeSvg(opts: TreeRenderOptions): string {
  const width = opts.width ?? 520;
  const height = opts.height ?? 460;
  const points = opts.points;
  const layout = opts.layout;
  const t = fitTransform(layout, width, height);
  const arc = arcFromRoot(points);
  const byId = new Map(points.map((p) => [p.id, p]));
  const lesionWindows = windowsFor(points, opts.lesions ?? []);
  const stagedWindows = windowsFor(points, opts.staged ?? []);
  const selectedPath =
    opts.selectedPathId === null || opts.selectedPathId === undefined
      ? null
      : new Set(pathPoints(points, opts.selectedPathId));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img">`,
  );

  // selected-path underlay first, so vessel strokes draw on top of it
  const underlay: string[] = [];
  const edges: string[] = [];
  for (const p of points) {
    if (p.parent === null) continue;
    const a = layout.get(p.parent);
    const b = layout.get(p.id);
    if (a === undefined || b === undefined) continue;
    const pa = applyTransform(t, a);
    const pb = applyTransform(t, b);
    const arcParent = arc.get(p.parent) ?? 0;
    const arcChild = arc.get(p.id) ?? 0;
    const staged = stagedWindows.some((w) => edgeInWindow(w, p.id, arcParent, arcChild));
    const lesion =
      !staged && lesionWindows.some((w) => edgeInWindow(w, p.id, arcParent, arcChild));
    const color = staged ? COLOR_STAGED : lesion ? COLOR_LESION : COLOR_VESSEL;
    const strokeWidth = Math.max(2 * p.radius * t.scale, 1);
    if (selectedPath !== null && selectedPath.has(p.id)) {
      underlay.push(
        `<line x1="${pa.x.toFixed(2)}" y1="${pa.y.toFixed(2)}" x2="${pb.x.toFixed(2)}" ` +
          `y2="${pb.y.toFixed(2)}" stroke="${COLOR_SELECTED}" ` +
          `stroke-width="${(strokeWidth + 5).toFixed(2)}" stroke-linecap="round" class="selected-path"/>`,
      );
    }
    const classes = staged ? "edge staged" : lesion ? "edge lesion" : "edge";
    edges.push(
      `<line x1="${pa.x.toFixed(2)}" y1="${pa.y.toFixed(2)}" x2="${pb.x.toFixed(2)}" ` +
        `y2="${pb.y.toFixed(2)}" stroke="${color}" stroke-width="${strokeWidth.toFixed(2)}" ` +
        `stroke-linecap="round" class="${classes}"/>`,
    );
  }
  parts.push(...underlay, ...edges);

  for (const id of opts.evaluationPoints ?? []) {
    const pos = layout.get(id);
    if (pos === undefined) continue;
    const pp = applyTransform(t, pos);
    parts.push(
      `<circle cx="${pp.x.toFixed(2)}" cy="${pp.y.toFixed(2)}" r="4" fill="#ffffff" ` +
        `stroke="#22313f" stroke-width="1.5" class="eval-point"><title>point ${id}</title></circle>`,
    );
  }

  for (const p of points) {
    if (!p.is_outlet) continue;
    const pos = layout.get(p.id);
    if (pos === undefined) continue;
    const pp = applyTransform(t, pos);
    parts.push(
      `<text x="${(pp.x + 6).toFixed(2)}" y="${(pp.y + 4).toFixed(2)}" font-size="10" ` +
        `fill="#55606a" class="outlet-label">${p.id}</text>`,
    );
  }

  const root = rootOf(points);
  const rootPos = layout.get(root.id);
  if (rootPos !== undefined) {
    const pp = applyTransform(t, rootPos);
    parts.push(
      `<circle cx="${pp.x.toFixed(2)}" cy="${pp.y.toFixed(2)}" r="3" fill="#22313f" class="root"/>`,
    );
  }

  parts.push("</svg>");
  return parts.join("");
}

export interface TraceRenderOptions {
  trace: PathTrace;
  width?: number;
  height?: number;
  /** Evaluation point ids; those on this path get markers. */
  evaluationPoints?: number[];
  title?: string;
}

function polyline(xs: number[], ys: number[]): string {
  const pairs: string[] = [];
  for (let i = 0; i < xs.length; i += 1) {
    const x = xs[i];
    const y = ys[i];
    if (x === undefined || y === undefined) continue;
    pairs.push(`${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return pairs.join(" ");
}

/**
 * FFR-versus-arc-length chart for one path: baseline dashed, post-plan solid,
 * markers at the evaluation points. Axis ticks are fixed scale labels; the
 * byte-exact FFR values live in the readout panel, not on the chart.
 */
export function renderTraceSvg(opts: TraceRenderOptions): string {
  const width = opts.width ?? 520;
  const height = opts.height ?? 240;
  const margin = { left: 44, right: 12, top: 20, bottom: 26 };
  const trace = opts.trace;
  const arcs = trace.arc;
  const post = trace.ffr_post;
  const values = [...trace.ffr_pre, ...(post ?? [])];
  const arcMax = Math.max(...arcs, 1e-9);
  let yMin = Math.min(0.75, ...values) - 0.03;
  yMin = Math.max(0, Math.min(yMin, 0.97));
  const yMax = 1.005;

  const sx = (a: number): number =>
    margin.left + ((width - margin.left - margin.right) * a) / arcMax;
  const sy = (v: number): number =>
    margin.top + ((height - margin.top - margin.bottom) * (yMax - v)) / (yMax - yMin);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
      `width="${width}" height="${height}" role="img">`,
  );
  if (opts.title !== undefined) {
    parts.push(`<text x="${margin.left}" y="13" font-size="11" fill="#333">${esc(opts.title)}</text>`);
  }

  // fixed-scale y ticks; these are axis labels, not service data
  for (const tick of [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]) {
    if (tick < yMin - 1e-9 || tick > yMax) continue;
    const y = sy(tick);
    const emphasis = tick === 0.8 ? ' stroke-dasharray="2 3" stroke="#c77"' : ' stroke="#ddd"';
    parts.push(
      `<line x1="${margin.left}" y1="${y.toFixed(2)}" x2="${(width - margin.right).toFixed(2)}" ` +
        `y2="${y.toFixed(2)}"${emphasis} stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${margin.left - 6}" y="${(y + 3.5).toFixed(2)}" font-size="10" fill="#777" ` +
        `text-anchor="end">${tick.toFixed(2)}</text>`,
    );
  }
  // x axis: arc length from the root
  const axisY = height - margin.bottom;
  parts.push(
    `<line x1="${margin.left}" y1="${axisY}" x2="${width - margin.right}" y2="${axisY}" ` +
      `stroke="#aaa" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${width - margin.right}" y="${height - 8}" font-size="10" fill="#777" ` +
      `text-anchor="end">arc length (cm)</text>`,
  );

  const preLine = polyline(
    arcs.map(sx),
    trace.ffr_pre.map((v) => sy(v)),
  );
  parts.push(
    `<polyline points="${preLine}" fill="none" stroke="${COLOR_PRE}" stroke-width="1.5" ` +
      `stroke-dasharray="5 4" class="trace-pre"/>`,
  );
  if (post !== undefined) {
    const postLine = polyline(
      arcs.map(sx),
      post.map((v) => sy(v)),
    );
    parts.push(
      `<polyline points="${postLine}" fill="none" stroke="${COLOR_POST}" stroke-width="2" ` +
        `class="trace-post"/>`,
    );
  }

  const evalSet = new Set(opts.evaluationPoints ?? []);
  if (evalSet.size > 0) {
    const series = post ?? trace.ffr_pre;
    for (let i = 0; i < trace.points.length; i += 1) {
      const id = trace.points[i];
      const a = arcs[i];
      const v = series[i];
      if (id === undefined || a === undefined || v === undefined || !evalSet.has(id)) continue;
      parts.push(
        `<circle cx="${sx(a).toFixed(2)}" cy="${sy(v).toFixed(2)}" r="4" fill="#ffffff" ` +
          `stroke="#22313f" stroke-width="1.5" class="eval-point"><title>point ${id}</title></circle>`,
      );
    }
  }

  parts.push("</svg>");
  return parts.join("");
}
