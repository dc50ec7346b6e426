/**
 * Wire-format types for the planner service (JSON over HTTP).
 *
 * These mirror the service payloads field for field. The UI never invents
 * hemodynamic numbers of its own: everything displayed as a result comes out
 * of one of these payloads.
 */

/** One centerline point of a tree document. */
export interface TreePoint {
  id: number;
  /** Parent point id; null for the root. */
  parent: number | null;
  /** Centerline distance to the parent point (cm); 0 for the root. */
  arc_length_from_parent: number;
  /** Lumen radius at this point (cm). */
  radius: number;
  is_outlet: boolean;
}

/** Centerline tree document, as produced by the generator or a segmentation. */
export interface TreeDocument {
  format_version: number;
  name: string;
  source: string;
  units: string;
  points: TreePoint[];
  /** Optional embedded boundary conditions; the service derives its own otherwise. */
  boundary_conditions?: BoundaryConditionsDocument;
}

/** Boundary-conditions document (CGS units throughout). */
export interface BoundaryConditionsDocument {
  aortic_pressure: number;
  outlet_resistance: Record<string, number>;
  viscosity?: number;
  density?: number;
}

/** Response of POST /models. */
export interface ModelSummary {
  model_id: string;
  n_points: number;
  n_lesions: number;
  /** Per anchor label, FFR at each outlet id. */
  anchor_ffr_at_outlets: Record<string, Record<string, number>>;
  build_seconds: number;
}

/** One contiguous modification interval of a plan. */
export interface PlanInterval {
  /** Outlet point id naming the root-to-outlet path the interval lies on. */
  path_id: number;
  /** Arc distance from the root where the interval starts (cm). */
  arc_start: number;
  /** Arc distance from the root where the interval ends (cm). */
  arc_end: number;
  /** 0 keeps the current lumen, 1 restores the ideal lumen. */
  target_fraction: number;
}

/** A candidate intervention: intervals to widen plus a blend length. */
export interface Plan {
  intervals: PlanInterval[];
  /** Taper length at each interval end (cm). */
  blend_length: number;
}

/** One detected lesion, as reported by GET /models/{id}/lesions. */
export interface LesionInfo {
  path_id: number;
  arc_start: number;
  arc_end: number;
  /** Worst fractional radius loss inside the lesion, in [0, 1]. */
  max_narrowing: number;
  kind: string;
  n_points: number;
  /** Service-suggested plan that fully treats this lesion. */
  default_plan: Plan;
}

/** Response of GET /models/{id}/lesions. */
export interface LesionList {
  model_id: string;
  lesions: LesionInfo[];
}

/** FFR along one root-to-outlet path. */
export interface PathTrace {
  /** Point ids along the path, root first. */
  points: number[];
  /** Arc distance from the root for each point (cm). */
  arc: number[];
  /** Baseline (pre-intervention) FFR at each point. */
  ffr_pre: number[];
  /** Post-plan FFR at each point; absent on the baseline-only endpoint. */
  ffr_post?: number[];
}

/** Body of POST /models/{id}/evaluate. */
export interface EvaluateRequest {
  plan: Plan;
  /** Restrict returned traces to these outlet ids; omit for the default set. */
  paths?: number[];
}

/** Response of POST /models/{id}/evaluate. */
export interface EvaluationResult {
  model_id: string;
  converged: boolean;
  iterations: number;
  runtime_seconds: number;
  /** Edge (child point) ids whose geometry the plan changed. */
  modified_edges: number[];
  /** Point ids where the service reports post-plan FFR readouts. */
  evaluation_points: number[];
  /** Post-plan FFR keyed by stringified evaluation point id. */
  ffr_at_evaluation_points: Record<string, number>;
  /** Pre/post FFR traces keyed by stringified outlet id. */
  traces: Record<string, PathTrace>;
}

/** Response of GET /models/{id}/traces (baseline only, no ffr_post). */
export interface TraceResponse {
  model_id: string;
  traces: Record<string, PathTrace>;
}

/** Error body shape: {"detail": {"code": ..., "message": ...}}. */
export interface ServiceErrorDetail {
  code: string;
  message: string;
}
