// Typed client for the annotation service JSON API.

export interface BudgetGauge {
  total: number;
  spent: number;
}

export interface ClusterSummary {
  index: number;
  size: number;
  verdict: string | null;
}

export interface ServerState {
  session_id: string;
  phase: string;
  budget: BudgetGauge | null;
  n_new: number | null;
  clusters: ClusterSummary[] | null;
  done: boolean;
  has_report: boolean;
  error: string | null;
}

export interface AnnotationRequest {
  request_id: string;
  point_id: string;
  text: string;
  phase: string;
  cluster_id: number | null;
  issued_at: number;
}

export interface LabelAck {
  request_id: string;
  point_id: string;
  label: string;
  spent: number;
}

export interface ClassList {
  classes: string[];
  known_at_start: string[];
}

export interface RunReport {
  discovery: { found: number; total_unknown: number; rate: number };
  metrics: { accuracy: number; macro_f1: number; test_size: number } | null;
  budget: { total: number; spent: number };
  silver: { count: number; precision: number | null } | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  state(): Promise<ServerState> {
    return this.get<ServerState>("/api/state");
  }

  queue(limit = 20): Promise<AnnotationRequest[]> {
    return this.get<AnnotationRequest[]>(`/api/queue?limit=${limit}`);
  }

  classes(): Promise<ClassList> {
    return this.get<ClassList>("/api/classes");
  }

  report(): Promise<RunReport> {
    return this.get<RunReport>("/api/report");
  }

  /**
   * Submit a label. Network failures are retried with the same request_id;
   * the service acks replays idempotently, so a retry can never double-charge.
   * HTTP errors (402 budget, 404 unknown, 409 conflict) are not retried.
   */
  async submitLabel(requestId: string, label: string, attempts = 3): Promise<LabelAck> {
    let lastFailure: unknown = null;
    for (let attempt = 0; attempt < attempts; attempt += 1) {
      let response: Response;
      try {
        response = await this.fetchImpl(this.baseUrl + "/api/labels", {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({ request_id: requestId, label }),
        });
      } catch (failure) {
        lastFailure = failure;
        continue;
      }
      if (!response.ok) throw await parseError(response);
      return (await response.json()) as LabelAck;
    }
    throw lastFailure instanceof Error ? lastFailure : new Error("network failure");
  }
}
