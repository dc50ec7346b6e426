import { describe, expect, it } from "vitest";

import { applyTransform, arcFromRoot, fitTransform, layoutTree, pathPoints } from "../src/layout.js";
import type { TreePoint } from "../src/types.js";

function chain(lengths: number[]): TreePoint[] {
  const points: TreePoint[] = [
    { id: 0, parent: null, arc_length_from_parent: 0, radius: 0.2, is_outlet: false },
  ];
  lengths.forEach((len, i) => {
    points.push({
      id: i + 1,
      parent: i,
      arc_length_from_parent: len,
      radius: 0.2,
      is_outlet: i === lengths.length - 1,
    });
  });
  return points;
}

/** Trunk 0-1-2, then 2 forks to (3,4) and (5,6,7); 4 and 7 are outlets. */
function fork(): TreePoint[] {
  return [
    { id: 0, parent: null, arc_length_from_parent: 0, radius: 0.25, is_outlet: false },
    { id: 1, parent: 0, arc_length_from_parent: 0.5, radius: 0.25, is_outlet: false },
    { id: 2, parent: 1, arc_length_from_parent: 0.5, radius: 0.25, is_outlet: false },
    { id: 3, parent: 2, arc_length_from_parent: 0.4, radius: 0.2, is_outlet: false },
    { id: 4, parent: 3, arc_length_from_parent: 0.4, radius: 0.2, is_outlet: true },
    { id: 5, parent: 2, arc_length_from_parent: 0.3, radius: 0.15, is_outlet: false },
    { id: 6, parent: 5, arc_length_from_parent: 0.3, radius: 0.15, is_outlet: false },
    { id: 7, parent: 6, arc_length_from_parent: 0.3, radius: 0.15, is_outlet: true },
  ];
}

describe("layoutTree", () => {
  it("is arc-length-true: every drawn edge has its centerline length", () => {
    const points = fork();
    const layout = layoutTree(points);
    for (const p of points) {
      if (p.parent === null) continue;
      const a = layout.get(p.parent);
      const b = layout.get(p.id);
      expect(a).toBeDefined();
      expect(b).toBeDefined();
      if (a === undefined || b === undefined) continue;
      const drawn = Math.hypot(b.x - a.x, b.y - a.y);
      expect(drawn).toBeCloseTo(p.arc_length_from_parent, 12);
    }
  });

  it("keeps unbranched chains straight", () => {
    const points = chain([0.5, 0.25, 0.8, 0.1]);
    const layout = layoutTree(points);
    const xs = points.map((p) => layout.get(p.id)?.x ?? NaN);
    for (const x of xs) expect(x).toBeCloseTo(xs[0] ?? NaN, 12);
    // cumulative arc length appears directly as drawn distance from the root
    const arc = arcFromRoot(points);
    const root = layout.get(0);
    if (root === undefined) throw new Error("no root position");
    for (const p of points) {
      const pos = layout.get(p.id);
      if (pos === undefined) throw new Error(`no position for ${p.id}`);
      expect(Math.hypot(pos.x - root.x, pos.y - root.y)).toBeCloseTo(arc.get(p.id) ?? NaN, 12);
    }
  });

  it("separates sibling branches", () => {
    const layout = layoutTree(fork());
    const left = layout.get(4);
    const right = layout.get(7);
    if (left === undefined || right === undefined) throw new Error("missing outlet positions");
    expect(Math.abs(left.x - right.x)).toBeGreaterThan(0.1);
  });

  it("produces finite coordinates for every point", () => {
    const layout = layoutTree(fork());
    for (const pos of layout.values()) {
      expect(Number.isFinite(pos.x)).toBe(true);
      expect(Number.isFinite(pos.y)).toBe(true);
    }
  });
});

describe("tree document helpers", () => {
  it("pathPoints walks root to outlet", () => {
    expect(pathPoints(fork(), 7)).toEqual([0, 1, 2, 5, 6, 7]);
    expect(pathPoints(fork(), 4)).toEqual([0, 1, 2, 3, 4]);
  });

  it("arcFromRoot accumulates edge lengths", () => {
    const arc = arcFromRoot(fork());
    expect(arc.get(0)).toBe(0);
    expect(arc.get(2)).toBeCloseTo(1.0, 12);
    expect(arc.get(7)).toBeCloseTo(1.9, 12);
  });
});

describe("fitTransform", () => {
  it("maps the layout into the requested box", () => {
    const layout = layoutTree(fork());
    const t = fitTransform(layout, 500, 400, 20);
    for (const pos of layout.values()) {
      const p = applyTransform(t, pos);
      expect(p.x).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(p.x).toBeLessThanOrEqual(480 + 1e-9);
      expect(p.y).toBeGreaterThanOrEqual(20 - 1e-9);
      expect(p.y).toBeLessThanOrEqual(380 + 1e-9);
    }
  });
});
