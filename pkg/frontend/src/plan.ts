/**
 * Staged-plan state for the planning UI.
 *
 * The draft holds the intervals the user is editing. It is "dirty" exactly
 * when the staged plan differs from the plan of the most recently applied
 * evaluation — compared by value through a canonical key, so re-staging
 * identical numbers is not a change.
 */

import type { LesionInfo, Plan, PlanInterval } from "./types.js";

function intervalKey(iv: PlanInterval): string {
  return `${iv.path_id}|${iv.arc_start}|${iv.arc_end}|${iv.target_fraction}`;
}

/** Canonical value key for a plan; independent of object key order. */
export function planKey(plan: Plan): string {
  return `${plan.blend_length}#${plan.intervals.map(intervalKey).join(";")}`;
}

function clonePlan(plan: Plan): Plan {
  return {
    blend_length: plan.blend_length,
    intervals: plan.intervals.map((iv) => ({ ...iv })),
  };
}

export class PlanDraft {
  private stagedPlan: Plan;
  private lastEvaluatedKey: string | null = null;

  constructor(initial: Plan) {
    this.stagedPlan = clonePlan(initial);
  }

  /** A defensive copy of the staged plan, safe to hand to the client. */
  get staged(): Plan {
    return clonePlan(this.stagedPlan);
  }

  get intervals(): readonly PlanInterval[] {
    return this.stagedPlan.intervals;
  }

  get blendLength(): number {
    return this.stagedPlan.blend_length;
  }

  /** True iff the staged plan differs from the last evaluated plan. */
  isDirty(): boolean {
    return planKey(this.stagedPlan) !== this.lastEvaluatedKey;
  }

  replace(plan: Plan): void {
    this.stagedPlan = clonePlan(plan);
  }

  setBlendLength(value: number): void {
    this.stagedPlan.blend_length = value;
  }

  setTargetFraction(index: number, value: number): void {
    const iv = this.stagedPlan.intervals[index];
    if (iv === undefined) throw new RangeError(`no interval ${index}`);
    iv.target_fraction = value;
  }

  setSpan(index: number, arcStart: number, arcEnd: number): void {
    const iv = this.stagedPlan.intervals[index];
    if (iv === undefined) throw new RangeError(`no interval ${index}`);
    iv.arc_start = arcStart;
    iv.arc_end = arcEnd;
  }

  /** Records that `plan` (as sent) has been evaluated and applied. */
  markEvaluated(plan: Plan): void {
    this.lastEvaluatedKey = planKey(plan);
  }
}

/**
 * Clamps a staged interval to the extent of its lesion: the span stays inside
 * the lesion's arc window and the fraction inside [0, 1]. This is an input
 * guard, not a physics decision — the service still validates the plan.
 */
export function clampToLesion(iv: PlanInterval, lesion: LesionInfo): PlanInterval {
  const lo = lesion.arc_start;
  const hi = lesion.arc_end;
  const start = Math.min(Math.max(iv.arc_start, lo), hi);
  const end = Math.min(Math.max(iv.arc_end, start), hi);
  const fraction = Math.min(Math.max(iv.target_fraction, 0), 1);
  return { path_id: iv.path_id, arc_start: start, arc_end: end, target_fraction: fraction };
}
