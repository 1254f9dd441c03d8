/**
 * Session view-model: the single client-side holder of API responses.
 *
 * No client-side truth: every mutation re-fetches or re-renders from the
 * server's response, and stale-version submissions are retried once after a
 * refresh. Subscribers are notified after every state change.
 */

import {
  ApiClient,
  ApiError,
  ClusterView,
  Decision,
  HistogramResponse,
  JobView,
  PromptMode,
  SessionView,
} from "./api.js";

export interface ViewState {
  session: SessionView | null;
  clusters: ClusterView[];
  histogram: HistogramResponse | null;
  jobs: JobView[];
  busy: boolean;
  error: string | null;
}

type Listener = (state: ViewState) => void;

export class SessionStore {
  private state: ViewState = {
    session: null,
    clusters: [],
    histogram: null,
    jobs: [],
    busy: false,
    error: null,
  };
  private listeners: Listener[] = [];

  constructor(private readonly client: ApiClient) {}

  get current(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async open(sessionId: string): Promise<void> {
    const session = await this.client.getSession(sessionId);
    this.patch({ session });
    await this.refreshDerived();
  }

  async create(body: Parameters<ApiClient["createSession"]>[0]): Promise<void> {
    const session = await this.client.createSession(body);
    this.patch({ session });
    await this.refreshDerived();
  }

  /** Re-pull clusters and histogram from the server (never computed locally). */
  async refreshDerived(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    const [clusters, histogram] = await Promise.all([
      this.client.getClusters(session.id),
      this.client.getHistogram(session.id),
    ]);
    this.patch({ clusters, histogram, error: null });
  }

  private async mutate(
    action: (version: number) => Promise<{ session: SessionView }>,
  ): Promise<void> {
    const session = this.state.session;
    if (!session) throw new Error("no session open");
    if (this.state.busy) throw new Error("a mutation is already in flight");
    this.patch({ busy: true, error: null });
    try {
      try {
        const response = await action(session.version);
        this.patch({ session: response.session });
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          // stale version or busy server: re-fetch, retry once against the fresh state
          const fresh = await this.client.getSession(session.id);
          this.patch({ session: fresh });
          const response = await action(fresh.version);
          this.patch({ session: response.session });
        } else {
          throw error;
        }
      }
      await this.refreshDerived();
    } catch (error) {
      this.patch({ error: error instanceof Error ? error.message : String(error) });
      throw error;
    } finally {
      this.patch({ busy: false });
    }
  }

  applyPrompt(text: string, mode: PromptMode, tau: number): Promise<void> {
    const id = this.requireSession().id;
    return this.mutate((version) => this.client.postPrompt(id, text, mode, tau, version));
  }

  decide(clusterId: number, decision: Decision): Promise<void> {
    const id = this.requireSession().id;
    return this.mutate((version) =>
      this.client.postDecision(id, clusterId, decision, version),
    );
  }

  recluster(k: number): Promise<void> {
    const id = this.requireSession().id;
    return this.mutate((version) => this.client.recluster(id, k, version));
  }

  resample(quota: number, seed?: number): Promise<void> {
    const id = this.requireSession().id;
    return this.mutate((version) => this.client.resample(id, quota, seed, version));
  }

  async launchJob(kind: string, params: Record<string, unknown>): Promise<JobView> {
    const id = this.requireSession().id;
    const job = await this.client.launchJob(id, kind, params);
    this.patch({ jobs: [...this.state.jobs, job] });
    return job;
  }

  async pollJobs(): Promise<void> {
    if (!this.state.jobs.length) return;
    const updated = await Promise.all(
      this.state.jobs.map((job) =>
        job.status === "done" || job.status === "failed"
          ? Promise.resolve(job)
          : this.client.getJob(job.id),
      ),
    );
    this.patch({ jobs: updated });
  }

  thumbUrl(maskId: string): string {
    return this.client.thumbUrl(maskId);
  }

  private requireSession(): SessionView {
    if (!this.state.session) throw new Error("no session open");
    return this.state.session;
  }
}
