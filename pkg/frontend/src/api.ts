/**
 * HTTP client for the planner service.
 *
 * Evaluate and trace responses are returned together with the raw response
 * text and its literal number tokens (see rawjson.ts) so the UI can display
 * service numbers byte for byte.
 */

import { numberTokens } from "./rawjson.js";
import type {
  EvaluateRequest,
  EvaluationResult,
  LesionList,
  ModelSummary,
  Plan,
  TraceResponse,
  TreeDocument,
} from "./types.js";

/** Minimal response surface the client needs; satisfied by the DOM Response. */
export interface WireResponse {
  ok: boolean;
  status: number;
  text(): Promise<string>;
}

export interface WireRequestInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (url: string, init?: WireRequestInit) => Promise<WireResponse>;

/** Error raised for non-2xx service responses, carrying the service error code. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** A parsed response plus its exact text and literal number tokens. */
export interface RawResponse<T> {
  body: T;
  text: string;
  /** Literal number tokens keyed by path, e.g. "ffr_at_evaluation_points/1510". */
  numbers: Map<string, string>;
}

function defaultFetch(url: string, init?: WireRequestInit): Promise<WireResponse> {
  // fetch must be invoked through globalThis; a detached reference throws in browsers
  return globalThis.fetch(url, init);
}

async function errorFrom(response: WireResponse): Promise<ServiceError> {
  const text = await response.text();
  try {
    const parsed: unknown = JSON.parse(text);
    if (typeof parsed === "object" && parsed !== null && "detail" in parsed) {
      const detail = (parsed as { detail: unknown }).detail;
      if (
        typeof detail === "object" &&
        detail !== null &&
        "code" in detail &&
        "message" in detail
      ) {
        const d = detail as { code: unknown; message: unknown };
        return new ServiceError(response.status, String(d.code), String(d.message));
      }
      // FastAPI request-validation errors put a list under "detail"
      return new ServiceError(response.status, "validation_error", JSON.stringify(detail));
    }
  } catch {
    // fall through: not JSON
  }
  return new ServiceError(response.status, "http_error", text || `HTTP ${response.status}`);
}

export class PlannerClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = defaultFetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async send(method: string, path: string, body?: unknown): Promise<WireResponse> {
    const init: WireRequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) throw await errorFrom(response);
    return response;
  }

  private async raw<T>(method: string, path: string, body?: unknown): Promise<RawResponse<T>> {
    const response = await this.send(method, path, body);
    const text = await response.text();
    return { body: JSON.parse(text) as T, text, numbers: numberTokens(text) };
  }

  /** Builds (or fetches the cached) model for a tree document. */
  async createModel(document: TreeDocument): Promise<ModelSummary> {
    const response = await this.send("POST", "/models", document);
    return JSON.parse(await response.text()) as ModelSummary;
  }

  /** Lists detected lesions with their service-suggested default plans. */
  async lesions(modelId: string): Promise<LesionList> {
    const response = await this.send("GET", `/models/${encodeURIComponent(modelId)}/lesions`);
    return JSON.parse(await response.text()) as LesionList;
  }

  /** Evaluates a candidate plan; the result keeps the raw number tokens. */
  evaluate(modelId: string, plan: Plan, paths?: number[]): Promise<RawResponse<EvaluationResult>> {
    const body: EvaluateRequest = paths === undefined ? { plan } : { plan, paths };
    return this.raw("POST", `/models/${encodeURIComponent(modelId)}/evaluate`, body);
  }

  /** Baseline FFR traces (no plan applied). */
  traces(modelId: string, path?: number): Promise<RawResponse<TraceResponse>> {
    const query = path === undefined ? "" : `?path=${path}`;
    return this.raw("GET", `/models/${encodeURIComponent(modelId)}/traces${query}`);
  }

  async deleteModel(modelId: string): Promise<void> {
    await this.send("DELETE", `/models/${encodeURIComponent(modelId)}`);
  }
}
