// Typed client for the advisor API. The UI performs no scheduling math:
// every number it shows comes verbatim out of these response bodies.

export interface ScheduleDoc {
  window_start: number;
  allocations: number[];
  policy: string;
  metrics: { carbon_g: number; compute_slot_hours: number; completion_slot: number };
}

export interface PolicyMetrics {
  carbon_g: number;
  compute_slot_hours: number;
  completion_slot: number;
  met_deadline: boolean;
}

export interface TimelineSlot {
  slot: number;
  requested_servers: number;
  granted_servers: number;
  intensity_actual: number;
  intensity_forecast: number;
  work_done: number;
  recomputed: boolean;
}

export interface PolicyResult {
  schedule: ScheduleDoc;
  metrics: PolicyMetrics;
  savings_vs_agnostic_pct: number;
  timeline: TimelineSlot[];
}

export interface SimulateResponse {
  policies: Record<string, PolicyResult>;
  trace_excerpt: { start_slot: number; slot_hours: number; intensities: number[] };
  warnings: string[];
}

export interface SweepCell {
  axis_value: number;
  policy: string;
  mean_carbon_g: number;
  mean_savings_vs_agnostic_pct?: number;
}

export interface SweepResponse {
  axis: string;
  omitted: number;
  rows: unknown[];
  summary: { axis: string; cells: SweepCell[] };
}

export interface RegionInfo {
  region: string;
  slots: number;
  mean: number;
  cov: number;
}

export interface SimulateRequest {
  region: string;
  start_offset: number;
  job: {
    length_slots: number;
    min_servers: number;
    max_servers: number;
    completion_slots: number;
  };
  curve: { mc?: number[]; preset?: string };
  policies: string[];
  config: { accounting_mode: string; rng_seed: number };
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (Array.isArray(body.detail)) {
      message = body.detail
        .map((d: { field: string; message: string }) => `${d.field}: ${d.message}`)
        .join("; ");
    } else if (body.detail) {
      message = String(body.detail);
    }
  } catch {
    // keep the status line
  }
  return new ApiError(message, response.status);
}

/**
 * One in-flight request per panel: a newer submission aborts and
 * supersedes the pending one, so stale responses never paint the UI.
 */
export class AdvisorClient {
  private inflight = new Map<string, AbortController>();

  constructor(readonly base: string = "") {}

  private async post<T>(panel: string, path: string, body: unknown): Promise<T> {
    this.inflight.get(panel)?.abort();
    const controller = new AbortController();
    this.inflight.set(panel, controller);
    const response = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal: controller.signal,
    });
    if (!response.ok) throw await parseError(response);
    return response.json();
  }

  async regions(): Promise<RegionInfo[]> {
    const response = await fetch(this.base + "/api/v1/regions");
    if (!response.ok) throw await parseError(response);
    return response.json();
  }

  simulate(request: SimulateRequest): Promise<SimulateResponse> {
    return this.post("scenario", "/api/v1/simulate", request);
  }

  sweep(request: SimulateRequest, values: number[]): Promise<SweepResponse> {
    return this.post("sweep", "/api/v1/sweep", {
      ...request,
      axis: { name: "completion_time", values },
    });
  }
}
