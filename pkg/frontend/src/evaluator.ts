/**
 * Evaluation loop: turns a stream of staged-plan edits into service calls.
 *
 * - Edits are debounced on the trailing edge (150 ms by default), so a drag
 *   burst produces exactly one evaluation once the user pauses.
 * - At most one request is in flight; edits arriving meanwhile overwrite a
 *   single pending slot (last writer wins) and dispatch on completion.
 * - Every request carries a sequence number. A response is applied only if
 *   its sequence number is higher than the last applied one, so a late
 *   response from an older request can never overwrite a newer result.
 */

import type { RawResponse } from "./api.js";
import { trailingDebounce, type Debounced } from "./debounce.js";
import type { EvaluationResult, Plan } from "./types.js";

export interface EvaluationOutcome {
  seq: number;
  plan: Plan;
  raw: RawResponse<EvaluationResult>;
}

export type EvaluateFn = (plan: Plan, seq: number) => Promise<RawResponse<EvaluationResult>>;

export class EvaluationLoop {
  private seqCounter = 0;
  private appliedSeq = 0;
  private inFlight = false;
  private pendingPlan: Plan | null = null;
  private readonly debounced: Debounced<[Plan]>;

  constructor(
    private readonly evaluate: EvaluateFn,
    private readonly onResult: (outcome: EvaluationOutcome) => void,
    private readonly onError: (error: unknown, seq: number, plan: Plan) => void,
    waitMs = 150,
  ) {
    this.debounced = trailingDebounce((plan: Plan) => {
      void this.dispatch(plan);
    }, waitMs);
  }

  /** Debounced entry point: call on every edit. */
  request(plan: Plan): void {
    this.debounced(plan);
  }

  /** True while an evaluation is scheduled, queued, or on the wire. */
  busy(): boolean {
    return this.inFlight || this.pendingPlan !== null || this.debounced.pending();
  }

  /**
   * Sends immediately, bypassing debounce and the single-flight queue.
   * Responses are still sequence-guarded, so racing sends cannot apply
   * out of order.
   */
  async send(plan: Plan): Promise<void> {
    const seq = ++this.seqCounter;
    try {
      const raw = await this.evaluate(plan, seq);
      this.applyIfFresh(seq, plan, raw);
    } catch (error) {
      this.onError(error, seq, plan);
    }
  }

  private applyIfFresh(seq: number, plan: Plan, raw: RawResponse<EvaluationResult>): boolean {
    if (seq <= this.appliedSeq) return false; // stale: a newer result is already shown
    this.appliedSeq = seq;
    this.onResult({ seq, plan, raw });
    return true;
  }

  private async dispatch(plan: Plan): Promise<void> {
    if (this.inFlight) {
      this.pendingPlan = plan;
      return;
    }
    this.inFlight = true;
    const seq = ++this.seqCounter;
    try {
      const raw = await this.evaluate(plan, seq);
      this.applyIfFresh(seq, plan, raw);
    } catch (error) {
      this.onError(error, seq, plan);
    } finally {
      this.inFlight = false;
      const next = this.pendingPlan;
      this.pendingPlan = null;
      if (next !== null) void this.dispatch(next);
    }
  }
}
