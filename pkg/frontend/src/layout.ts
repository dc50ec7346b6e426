/**
 * Arc-length-true schematic layout for a centerline tree.
 *
 * The 2D coordinates are synthetic in angle but true in length: every drawn
 * edge has euclidean length equal to its centerline arc length, so distances
 * along the schematic match distances in the vessel. Angles spread each
 * branch's children over an angular span proportional to the number of
 * outlets beneath them; chains without branching stay straight.
 */

import type { TreePoint } from "./types.js";

export interface XY {
  x: number;
  y: number;
}

/** Child point ids per parent id, in document order. */
export function childrenOf(points: TreePoint[]): Map<number, number[]> {
  const children = new Map<number, number[]>();
  for (const p of points) children.set(p.id, []);
  for (const p of points) {
    if (p.parent === null) continue;
    const list = children.get(p.parent);
    if (list === undefined) throw new Error(`point ${p.id} has unknown parent ${p.parent}`);
    list.push(p.id);
  }
  return children;
}

/** The root point (parent === null). */
export function rootOf(points: TreePoint[]): TreePoint {
  const root = points.find((p) => p.parent === null);
  if (root === undefined) throw new Error("tree has no root point");
  return root;
}

/** Cumulative arc length from the root, per point id. */
export function arcFromRoot(points: TreePoint[]): Map<number, number> {
  const byId = new Map(points.map((p) => [p.id, p]));
  const arc = new Map<number, number>();
  const resolve = (id: number): number => {
    const cached = arc.get(id);
    if (cached !== undefined) return cached;
    const p = byId.get(id);
    if (p === undefined) throw new Error(`unknown point ${id}`);
    const value = p.parent === null ? 0 : resolve(p.parent) + p.arc_length_from_parent;
    arc.set(id, value);
    return value;
  };
  for (const p of points) resolve(p.id);
  return arc;
}

/** Point ids along the root-to-outlet path, root first. */
export function pathPoints(points: TreePoint[], outletId: number): number[] {
  const byId = new Map(points.map((p) => [p.id, p]));
  const path: number[] = [];
  let cursor: number | null = outletId;
  while (cursor !== null) {
    const p = byId.get(cursor);
    if (p === undefined) throw new Error(`unknown point ${cursor}`);
    path.push(p.id);
    cursor = p.parent;
  }
  path.reverse();
  return path;
}

/** Number of outlet leaves in each point's subtree. */
function leafCounts(points: TreePoint[], children: Map<number, number[]>): Map<number, number> {
  const counts = new Map<number, number>();
  // points are not guaranteed topologically sorted; recurse with memoisation
  const count = (id: number): number => {
    const cached = counts.get(id);
    if (cached !== undefined) return cached;
    const kids = children.get(id) ?? [];
    const value = kids.length === 0 ? 1 : kids.reduce((acc, k) => acc + count(k), 0);
    counts.set(id, value);
    return value;
  };
  for (const p of points) count(p.id);
  return counts;
}

/**
 * Computes schematic coordinates for every point. The root sits at (0, 0)
 * and the tree grows toward +y; `spread` is the total angular fan in radians.
 */
export function layoutTree(points: TreePoint[], spread = Math.PI * 0.9): Map<number, XY> {
  const children = childrenOf(points);
  const counts = leafCounts(points, children);
  const root = rootOf(points);
  const byId = new Map(points.map((p) => [p.id, p]));
  const positions = new Map<number, XY>();
  positions.set(root.id, { x: 0, y: 0 });

  // stack of (point id, angular span) — the point's own direction is the span centre
  const stack: Array<{ id: number; a0: number; a1: number }> = [
    { id: root.id, a0: -spread / 2, a1: spread / 2 },
  ];
  while (stack.length > 0) {
    const frame = stack.pop();
    if (frame === undefined) break;
    const parentPos = positions.get(frame.id);
    if (parentPos === undefined) throw new Error(`point ${frame.id} laid out before its parent`);
    const kids = children.get(frame.id) ?? [];
    const total = kids.reduce((acc, k) => acc + (counts.get(k) ?? 1), 0);
    let cursor = frame.a0;
    for (const kid of kids) {
      const weight = counts.get(kid) ?? 1;
      const slice = total === 0 ? 0 : ((frame.a1 - frame.a0) * weight) / total;
      const a0 = cursor;
      const a1 = cursor + slice;
      cursor = a1;
      const theta = (a0 + a1) / 2;
      const edge = byId.get(kid);
      if (edge === undefined) throw new Error(`unknown point ${kid}`);
      positions.set(kid, {
        x: parentPos.x + edge.arc_length_from_parent * Math.sin(theta),
        y: parentPos.y + edge.arc_length_from_parent * Math.cos(theta),
      });
      stack.push({ id: kid, a0, a1 });
    }
  }
  return positions;
}

export interface ViewTransform {
  scale: number;
  dx: number;
  dy: number;
}

/** Uniform scale-and-translate that fits the layout into a width×height box. */
export function fitTransform(
  layout: Map<number, XY>,
  width: number,
  height: number,
  margin = 24,
): ViewTransform {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of layout.values()) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  if (!Number.isFinite(minX)) return { scale: 1, dx: width / 2, dy: height / 2 };
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  return {
    scale,
    dx: margin + (width - 2 * margin - scale * spanX) / 2 - scale * minX,
    dy: margin + (height - 2 * margin - scale * spanY) / 2 - scale * minY,
  };
}

export function applyTransform(t: ViewTransform, p: XY): XY {
  return { x: t.scale * p.x + t.dx, y: t.scale * p.y + t.dy };
}
