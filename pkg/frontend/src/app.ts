/**
 * Browser entry point: wires the planner widgets to the evaluation loop.
 *
 * The page talks to the planner service only; its single configuration knob
 * is the service base address (window.PSROM_BASE_URL, a ?service= query
 * parameter, or the default localhost address). Every hemodynamic number on
 * screen is a literal token from a service response.
 */

import { PlannerClient, ServiceError } from "./api.js";
import { EvaluationLoop, type EvaluationOutcome } from "./evaluator.js";
import { layoutTree, type XY } from "./layout.js";
import { clampToLesion, PlanDraft } from "./plan.js";
import { ffrReadouts, renderTraceSvg, renderTreeSvg } from "./render.js";
import type {
  BoundaryConditionsDocument,
  LesionInfo,
  ModelSummary,
  Plan,
  TreeDocument,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function readFileText(input: HTMLInputElement): Promise<string | null> {
  const file = input.files?.[0];
  if (file === undefined) return Promise.resolve(null);
  return file.text();
}

class PlannerApp {
  private client: PlannerClient;
  private readonly loop: EvaluationLoop;

  private treeDoc: TreeDocument | null = null;
  private layout: Map<number, XY> = new Map();
  private model: ModelSummary | null = null;
  private lesions: LesionInfo[] = [];
  private draft: PlanDraft | null = null;
  private lastOutcome: EvaluationOutcome | null = null;
  private selectedPathId: number | null = null;
  private lastTouchedInterval = -1;

  // widgets
  private readonly statusLine = el("div", { class: "status" }, "no model loaded");
  private readonly dirtyBadge = el("span", { class: "badge hidden" }, "edited — evaluating…");
  private readonly errorBanner = el("div", { class: "error hidden" });
  private readonly treePane = el("div", { class: "pane tree-pane" });
  private readonly tracePane = el("div", { class: "pane trace-pane" });
  private readonly readoutPane = el("div", { class: "pane readout-pane" });
  private readonly controlsPane = el("div", { class: "pane controls-pane" });
  private readonly pathSelect = el("select", { class: "path-select" });
  private intervalHints: HTMLElement[] = [];

  constructor(
    private readonly root: HTMLElement,
    baseUrl: string,
  ) {
    this.client = new PlannerClient(baseUrl);
    this.loop = new EvaluationLoop(
      (plan) => {
        const model = this.model;
        if (model === null) return Promise.reject(new Error("no model"));
        return this.client.evaluate(model.model_id, plan);
      },
      (outcome) => this.applyOutcome(outcome),
      (error, _seq, plan) => this.showEvaluationError(error, plan),
    );
    this.buildShell(baseUrl);
  }

  private buildShell(baseUrl: string): void {
    this.root.replaceChildren();

    const header = el("header");
    header.append(el("h1", {}, "Intervention planner"));
    const addr = el("input", {
      type: "text",
      size: "32",
      value: baseUrl,
      title: "planner service base address",
    });
    const treeInput = el("input", { type: "file", accept: ".json,application/json" });
    const bcInput = el("input", { type: "file", accept: ".json,application/json" });
    const loadButton = el("button", {}, "Build model");
    loadButton.addEventListener("click", () => {
      void this.loadModel(addr.value.trim(), treeInput, bcInput);
    });
    const form = el("div", { class: "load-form" });
    form.append(
      el("label", {}, "service "),
      addr,
      el("label", {}, " tree "),
      treeInput,
      el("label", {}, " boundary conditions (optional) "),
      bcInput,
      loadButton,
    );
    header.append(form, this.statusLine, this.errorBanner);

    const main = el("main", { class: "columns" });
    const left = el("div", { class: "column" });
    left.append(this.treePane, this.controlsPane);
    const right = el("div", { class: "column" });
    const traceHeader = el("div", { class: "trace-header" });
    traceHeader.append(el("label", {}, "path "), this.pathSelect, this.dirtyBadge);
    this.pathSelect.addEventListener("change", () => {
      this.selectedPathId = Number(this.pathSelect.value);
      this.renderViews();
    });
    right.append(traceHeader, this.tracePane, this.readoutPane);
    main.append(left, right);

    this.root.append(header, main);
  }

  private async loadModel(
    baseUrl: string,
    treeInput: HTMLInputElement,
    bcInput: HTMLInputElement,
  ): Promise<void> {
    try {
      this.showError(null);
      const treeText = await readFileText(treeInput);
      if (treeText === null) {
        this.showError("choose a tree document first");
        return;
      }
      const doc = JSON.parse(treeText) as TreeDocument;
      const bcText = await readFileText(bcInput);
      if (bcText !== null) {
        doc.boundary_conditions = JSON.parse(bcText) as BoundaryConditionsDocument;
      }
      const client = new PlannerClient(baseUrl);
      this.statusLine.textContent = "building model…";
      const model = await client.createModel(doc);
      const lesionList = await client.lesions(model.model_id);

      // adopt the new connection
      this.client = client;
      this.treeDoc = doc;
      this.layout = layoutTree(doc.points);
      this.model = model;
      this.lesions = lesionList.lesions;
      this.lastOutcome = null;
      this.lastTouchedInterval = -1;
      this.draft = new PlanDraft(this.combinedDefaultPlan());
      this.selectedPathId = this.lesions[0]?.path_id ?? this.firstOutletId();
      this.statusLine.textContent =
        `model ${model.model_id} — ${model.n_points} points, ` +
        `${model.n_lesions} lesion(s), built in ${model.build_seconds.toFixed(2)} s`;
      this.buildControls();
      this.renderViews();
      void this.loop.send(this.draft.staged);
    } catch (error) {
      this.showError(describeError(error));
    }
  }

  private combinedDefaultPlan(): Plan {
    const intervals = this.lesions.flatMap((l) => l.default_plan.intervals.map((iv) => ({ ...iv })));
    const blend = this.lesions[0]?.default_plan.blend_length ?? 0.2;
    return { intervals, blend_length: blend };
  }

  private firstOutletId(): number | null {
    const outlet = this.treeDoc?.points.find((p) => p.is_outlet);
    return outlet === undefined ? null : outlet.id;
  }

  /** One slider row per staged interval, bounded by its lesion's window. */
  private buildControls(): void {
    this.controlsPane.replaceChildren();
    this.intervalHints = [];
    const draft = this.draft;
    if (draft === null) return;
    this.controlsPane.append(el("h2", {}, "Staged plan"));
    draft.intervals.forEach((iv, index) => {
      const lesion = this.lesions[index];
      const row = el("div", { class: "interval-row" });
      row.append(
        el(
          "div",
          { class: "interval-title" },
          `interval ${index} — path ${iv.path_id}` +
            (lesion !== undefined ? ` (${lesion.kind}, narrowing ${lesion.max_narrowing.toFixed(2)})` : ""),
        ),
      );

      const addSlider = (
        label: string,
        min: number,
        max: number,
        step: number,
        value: number,
        apply: (v: number) => void,
      ): void => {
        const slider = el("input", {
          type: "range",
          min: String(min),
          max: String(max),
          step: String(step),
          value: String(value),
        });
        const valueLabel = el("span", { class: "slider-value" }, String(value));
        slider.addEventListener("input", () => {
          const v = Number(slider.value);
          valueLabel.textContent = slider.value;
          this.lastTouchedInterval = index;
          apply(v);
          this.onEdit();
        });
        const line = el("div", { class: "slider-line" });
        line.append(el("label", {}, label), slider, valueLabel);
        row.append(line);
      };

      const lo = lesion?.arc_start ?? iv.arc_start;
      const hi = lesion?.arc_end ?? iv.arc_end;
      addSlider("widen to (× ideal)", 0, 1, 0.01, iv.target_fraction, (v) => {
        this.stageClamped(index, { ...this.intervalAt(index), target_fraction: v });
      });
      addSlider("start (cm)", lo, hi, 0.01, iv.arc_start, (v) => {
        const cur = this.intervalAt(index);
        this.stageClamped(index, { ...cur, arc_start: v, arc_end: Math.max(v, cur.arc_end) });
      });
      addSlider("end (cm)", lo, hi, 0.01, iv.arc_end, (v) => {
        const cur = this.intervalAt(index);
        this.stageClamped(index, { ...cur, arc_end: v, arc_start: Math.min(v, cur.arc_start) });
      });

      const hint = el("div", { class: "hint hidden" });
      row.append(hint);
      this.intervalHints.push(hint);
      this.controlsPane.append(row);
    });
  }

  private intervalAt(index: number): { path_id: number; arc_start: number; arc_end: number; target_fraction: number } {
    const draft = this.draft;
    if (draft === null) throw new Error("no draft");
    const iv = draft.intervals[index];
    if (iv === undefined) throw new RangeError(`no interval ${index}`);
    return { ...iv };
  }

  private stageClamped(
    index: number,
    iv: { path_id: number; arc_start: number; arc_end: number; target_fraction: number },
  ): void {
    const draft = this.draft;
    if (draft === null) return;
    const lesion = this.lesions[index];
    const next = lesion === undefined ? iv : clampToLesion(iv, lesion);
    draft.setSpan(index, next.arc_start, next.arc_end);
    draft.setTargetFraction(index, next.target_fraction);
  }

  /** Each edit restages, refreshes the dirty badge, and asks for (debounced) evaluation. */
  private onEdit(): void {
    const draft = this.draft;
    if (draft === null) return;
    this.updateDirtyBadge();
    this.renderTree();
    this.loop.request(draft.staged);
  }

  private applyOutcome(outcome: EvaluationOutcome): void {
    this.lastOutcome = outcome;
    this.draft?.markEvaluated(outcome.plan);
    this.clearHints();
    this.showError(null);
    const n = outcome.raw.numbers;
    const runtime = n.get("runtime_seconds") ?? "?";
    const iterations = n.get("iterations") ?? "?";
    this.statusLine.textContent =
      `evaluation #${outcome.seq}: ${outcome.raw.body.converged ? "converged" : "NOT CONVERGED"} ` +
      `in ${iterations} iteration(s), ${runtime} s solve time`;
    this.updateDirtyBadge();
    this.renderViews();
  }

  private showEvaluationError(error: unknown, plan: Plan): void {
    if (error instanceof ServiceError && (error.code === "envelope" || error.code === "invalid_plan")) {
      // constraint violation: pin the message to the interval being dragged
      const hint = this.intervalHints[this.lastTouchedInterval];
      if (hint !== undefined) {
        hint.textContent = `constraint: ${error.message}`;
        hint.classList.remove("hidden");
        this.updateDirtyBadge();
        return;
      }
    }
    this.showError(describeError(error));
    void plan;
  }

  private clearHints(): void {
    for (const hint of this.intervalHints) {
      hint.classList.add("hidden");
      hint.textContent = "";
    }
  }

  private showError(message: string | null): void {
    if (message === null) {
      this.errorBanner.classList.add("hidden");
      this.errorBanner.textContent = "";
    } else {
      this.errorBanner.classList.remove("hidden");
      this.errorBanner.textContent = message;
    }
  }

  private updateDirtyBadge(): void {
    const dirty = this.draft?.isDirty() ?? false;
    this.dirtyBadge.classList.toggle("hidden", !dirty);
  }

  private renderViews(): void {
    this.renderTree();
    this.renderTrace();
    this.renderReadouts();
    this.refreshPathChoices();
  }

  private renderTree(): void {
    const doc = this.treeDoc;
    if (doc === null) return;
    this.treePane.innerHTML = renderTreeSvg({
      points: doc.points,
      layout: this.layout,
      lesions: this.lesions,
      staged: this.draft?.staged.intervals ?? [],
      evaluationPoints: this.lastOutcome?.raw.body.evaluation_points ?? [],
      selectedPathId: this.selectedPathId,
    });
  }

  private renderTrace(): void {
    const outcome = this.lastOutcome;
    const selected = this.selectedPathId;
    if (outcome === null || selected === null) {
      this.tracePane.textContent = "evaluate a plan to see FFR traces";
      return;
    }
    const trace = outcome.raw.body.traces[String(selected)];
    if (trace === undefined) {
      this.tracePane.textContent = `no trace for path ${selected} in the last evaluation`;
      return;
    }
    this.tracePane.innerHTML = renderTraceSvg({
      trace,
      evaluationPoints: outcome.raw.body.evaluation_points,
      title: `path ${selected}: baseline (dashed) vs plan (solid)`,
    });
  }

  /** FFR readouts printed exactly as the service spelled them. */
  private renderReadouts(): void {
    const outcome = this.lastOutcome;
    this.readoutPane.replaceChildren();
    if (outcome === null) return;
    this.readoutPane.append(el("h2", {}, "FFR at evaluation points"));
    const list = el("dl", { class: "readouts" });
    for (const r of ffrReadouts(outcome.raw)) {
      list.append(el("dt", {}, `point ${r.pointId}`), el("dd", { class: "ffr-value" }, r.token));
    }
    this.readoutPane.append(list);
  }

  private refreshPathChoices(): void {
    const outcome = this.lastOutcome;
    const ids =
      outcome !== null
        ? Object.keys(outcome.raw.body.traces)
        : this.treeDoc?.points.filter((p) => p.is_outlet).map((p) => String(p.id)) ?? [];
    const current = this.selectedPathId === null ? "" : String(this.selectedPathId);
    this.pathSelect.replaceChildren();
    for (const id of ids) {
      const option = el("option", { value: id }, id);
      if (id === current) option.selected = true;
      this.pathSelect.append(option);
    }
    if (ids.length > 0 && !ids.includes(current)) {
      const first = ids[0];
      if (first !== undefined) {
        this.selectedPathId = Number(first);
        this.pathSelect.value = first;
      }
    }
  }
}

function describeError(error: unknown): string {
  if (error instanceof ServiceError) return `${error.code}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}

declare global {
  interface Window {
    PSROM_BASE_URL?: string;
  }
}

function defaultBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  return window.PSROM_BASE_URL ?? fromQuery ?? "http://127.0.0.1:8000";
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root !== null) new PlannerApp(root, defaultBaseUrl());
}

export { PlannerApp };
