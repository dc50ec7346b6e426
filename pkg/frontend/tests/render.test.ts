import { describe, expect, it } from "vitest";

import { layoutTree } from "../src/layout.js";
import { esc, renderTraceSvg, renderTreeSvg } from "../src/render.js";
import type { LesionInfo, PathTrace, TreePoint } from "../src/types.js";

function smallTree(): TreePoint[] {
  return [
    { id: 0, parent: null, arc_length_from_parent: 0, radius: 0.25, is_outlet: false },
    { id: 1, parent: 0, arc_length_from_parent: 0.5, radius: 0.25, is_outlet: false },
    { id: 2, parent: 1, arc_length_from_parent: 0.5, radius: 0.22, is_outlet: false },
    { id: 3, parent: 2, arc_length_from_parent: 0.5, radius: 0.2, is_outlet: true },
    { id: 4, parent: 2, arc_length_from_parent: 0.4, radius: 0.15, is_outlet: true },
  ];
}

const lesion: LesionInfo = {
  path_id: 3,
  arc_start: 0.4,
  arc_end: 1.1,
  max_narrowing: 0.45,
  kind: "focal",
  n_points: 3,
  default_plan: {
    intervals: [{ path_id: 3, arc_start: 0.4, arc_end: 1.1, target_fraction: 1 }],
    blend_length: 0.2,
  },
};

describe("renderTreeSvg", () => {
  it("draws one stroke per edge plus markers and labels", () => {
    const points = smallTree();
    const svg = renderTreeSvg({
      points,
      layout: layoutTree(points),
      lesions: [lesion],
      staged: [{ path_id: 3, arc_start: 0.5, arc_end: 0.9, target_fraction: 0.8 }],
      evaluationPoints: [2],
      selectedPathId: 3,
    });
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg.endsWith("</svg>")).toBe(true);
    const edges = svg.match(/class="edge/g) ?? [];
    expect(edges).toHaveLength(4); // one per non-root point
    expect(svg).toContain('class="edge staged"');
    expect(svg).toContain('class="edge lesion"');
    expect(svg).toContain('class="selected-path"');
    expect(svg).toContain('class="eval-point"');
    // outlet labels for both outlets
    expect(svg).toContain(">3</text>");
    expect(svg).toContain(">4</text>");
  });

  it("marks no lesion edges without lesions", () => {
    const points = smallTree();
    const svg = renderTreeSvg({ points, layout: layoutTree(points) });
    expect(svg).not.toContain('class="edge lesion"');
    expect(svg).not.toContain('class="edge staged"');
  });
});

describe("renderTraceSvg", () => {
  const trace: PathTrace = {
    points: [0, 1, 2, 3],
    arc: [0, 0.5, 1.0, 1.5],
    ffr_pre: [1.0, 0.95, 0.8, 0.78],
    ffr_post: [1.0, 0.97, 0.93, 0.92],
  };

  it("draws the baseline dashed and the plan solid, with markers", () => {
    const svg = renderTraceSvg({ trace, evaluationPoints: [2], title: "path 3" });
    expect(svg).toContain('class="trace-pre"');
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain('class="trace-post"');
    expect((svg.match(/class="eval-point"/g) ?? []).length).toBe(1);
    expect(svg).toContain("path 3");
  });

  it("renders baseline-only traces without a post line", () => {
    const pre: PathTrace = { points: trace.points, arc: trace.arc, ffr_pre: trace.ffr_pre };
    const svg = renderTraceSvg({ trace: pre });
    expect(svg).toContain('class="trace-pre"');
    expect(svg).not.toContain('class="trace-post"');
  });

  it("escapes markup in titles", () => {
    const svg = renderTraceSvg({ trace, title: 'a<b>&"c' });
    expect(svg).toContain("a&lt;b&gt;&amp;&quot;c");
  });
});

describe("esc", () => {
  it("escapes SVG-significant characters", () => {
    expect(esc('<a href="x">&')).toBe("&lt;a href=&quot;x&quot;&gt;&amp;");
  });
});
