/**
 * Typed client for the maskforge session API.
 *
 * Pure transport layer: every method maps to one endpoint and returns the
 * server payload unchanged. All view state derives from these responses.
 */

export type PromptMode = "drop" | "keep";
export type Decision = "keep" | "drop";
export type JobStatus = "queued" | "running" | "done" | "failed";

export interface SessionView {
  id: string;
  version: number;
  mask_count: number;
  survivor_count: number;
  prompts: { text: string; mode: PromptMode; tau: number }[];
  k: number | null;
  decisions: Record<string, Decision>;
  resample_count: number | null;
  state_hash: string;
}

export interface ClusterView {
  cluster_id: number;
  size: number;
  decision: Decision | "undecided";
  sample_mask_ids: string[];
  histogram: [string, number][];
}

export interface HistogramResponse {
  survivors: [string, number][];
  resampled: [string, number][] | null;
  version: number;
}

export interface MutationResponse {
  result: Record<string, unknown>;
  session: SessionView;
}

export interface ClusterMasksResponse {
  cluster_id: number;
  mask_ids: string[];
  page: number;
  page_size: number;
  total: number;
  pages: number;
}

export interface JobView {
  id: string;
  session_id: string;
  kind: string;
  params: Record<string, unknown>;
  status: JobStatus;
  result: Record<string, unknown> | null;
  error: { code: string; message: string } | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export interface SessionCreateBody {
  mask_path: string;
  embedding_path: string;
  frames_dir?: string;
  dedup_tau?: number;
  seed?: number;
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "HttpError", message: response.statusText };
  }
  throw new ApiError(response.status, body);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetcher: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetcher(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  createSession(body: SessionCreateBody): Promise<SessionView> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/sessions/${id}`);
  }

  getClusters(id: string): Promise<ClusterView[]> {
    return this.request(`/sessions/${id}/clusters`);
  }

  getClusterMasks(
    id: string,
    clusterId: number,
    page = 0,
    pageSize = 24,
  ): Promise<ClusterMasksResponse> {
    return this.request(
      `/sessions/${id}/clusters/${clusterId}/masks?page=${page}&page_size=${pageSize}`,
    );
  }

  getHistogram(id: string): Promise<HistogramResponse> {
    return this.request(`/sessions/${id}/histogram`);
  }

  postPrompt(
    id: string,
    text: string,
    mode: PromptMode,
    tau: number,
    version?: number,
  ): Promise<MutationResponse> {
    return this.request(`/sessions/${id}/prompts`, {
      method: "POST",
      body: JSON.stringify({ text, mode, tau, version }),
    });
  }

  postDecision(
    id: string,
    clusterId: number,
    decision: Decision,
    version?: number,
  ): Promise<MutationResponse> {
    return this.request(`/sessions/${id}/clusters/${clusterId}/decision`, {
      method: "POST",
      body: JSON.stringify({ decision, version }),
    });
  }

  recluster(id: string, k: number, version?: number): Promise<MutationResponse> {
    return this.request(`/sessions/${id}/recluster`, {
      method: "POST",
      body: JSON.stringify({ k, version }),
    });
  }

  resample(id: string, quota: number, seed?: number, version?: number): Promise<MutationResponse> {
    return this.request(`/sessions/${id}/resample`, {
      method: "POST",
      body: JSON.stringify({ quota, seed, version }),
    });
  }

  launchJob(id: string, kind: string, params: Record<string, unknown>): Promise<JobView> {
    return this.request(`/sessions/${id}/jobs`, {
      method: "POST",
      body: JSON.stringify({ kind, params }),
    });
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request(`/jobs/${jobId}`);
  }

  thumbUrl(maskId: string): string {
    return `${this.baseUrl}/masks/${maskId}/thumb.png`;
  }
}

/** Poll a job until it reaches a terminal state; resolves with the job. */
export async function pollJob(
  client: ApiClient,
  jobId: string,
  intervalMs = 250,
  timeoutMs = 60_000,
): Promise<JobView> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const job = await client.getJob(jobId);
    if (job.status === "done" || job.status === "failed") {
      return job;
    }
    if (Date.now() > deadline) {
      throw new Error(`job ${jobId} did not finish within ${timeoutMs}ms`);
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
