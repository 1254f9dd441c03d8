/**
 * DOM rendering for the review UI: cluster gallery, prompt panel, histogram
 * bars, and the job console. Optimistic UI is forbidden; every control
 * re-renders from the store after the server responds.
 */

import { ClusterView, JobView } from "./api.js";
import { SessionStore, ViewState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function renderHistogram(state: ViewState): HTMLElement {
  const root = el("div", { class: "histogram", "data-testid": "histogram" });
  const bars = state.histogram?.survivors ?? [];
  const max = bars.length ? Math.max(...bars.map(([, count]) => count)) : 1;
  for (const [label, count] of bars) {
    const bar = el("div", {
      class: "bar",
      "data-label": label,
      "data-count": String(count),
    });
    bar.style.width = `${Math.round((count / max) * 100)}%`;
    bar.append(el("span", { class: "bar-label" }, [`${label} (${count})`]));
    root.append(bar);
  }
  if (state.histogram?.resampled) {
    const resampled = el("div", { class: "resampled", "data-testid": "resampled" });
    for (const [label, count] of state.histogram.resampled) {
      resampled.append(
        el("div", { class: "bar resampled-bar", "data-label": label, "data-count": String(count) }),
      );
    }
    root.append(resampled);
  }
  return root;
}

function clusterCard(cluster: ClusterView, store: SessionStore, busy: boolean): HTMLElement {
  const card = el("div", {
    class: `cluster-card decision-${cluster.decision}`,
    "data-testid": "cluster-card",
    "data-cluster-id": String(cluster.cluster_id),
    "data-decision": cluster.decision,
  });
  card.append(
    el("h3", {}, [`cluster ${cluster.cluster_id} (${cluster.size})`]),
  );
  const thumbs = el("div", { class: "thumbs" });
  for (const maskId of cluster.sample_mask_ids) {
    thumbs.append(
      el("img", { src: store.thumbUrl(maskId), alt: maskId, class: "thumb" }),
    );
  }
  card.append(thumbs);
  const controls = el("div", { class: "controls" });
  for (const decision of ["keep", "drop"] as const) {
    const button = el(
      "button",
      { "data-action": decision, "data-cluster-id": String(cluster.cluster_id) },
      [decision],
    ) as HTMLButtonElement;
    button.disabled = busy;
    button.addEventListener("click", () => {
      void store.decide(cluster.cluster_id, decision).catch(() => undefined);
    });
    controls.append(button);
  }
  card.append(controls);
  return card;
}

export function renderClusterGrid(state: ViewState, store: SessionStore): HTMLElement {
  const root = el("div", { class: "cluster-grid", "data-testid": "cluster-grid" });
  if (!state.clusters.length) {
    root.append(
      el("p", { class: "empty-state", "data-testid": "empty-state" }, [
        state.session ? "No clustering yet. Choose k and recluster." : "No session loaded.",
      ]),
    );
    return root;
  }
  const bySize = [...state.clusters].sort((a, b) => b.size - a.size);
  for (const cluster of bySize) {
    root.append(clusterCard(cluster, store, state.busy));
  }
  return root;
}

export function renderPromptPanel(state: ViewState, store: SessionStore): HTMLElement {
  const root = el("form", { class: "prompt-panel", "data-testid": "prompt-panel" });
  const text = el("input", {
    type: "text",
    name: "text",
    placeholder: "category, e.g. sky",
    "data-testid": "prompt-text",
  }) as HTMLInputElement;
  const mode = el("select", { name: "mode", "data-testid": "prompt-mode" }) as HTMLSelectElement;
  mode.append(el("option", { value: "drop" }, ["drop"]));
  mode.append(el("option", { value: "keep" }, ["keep"]));
  const tau = el("input", {
    type: "range",
    name: "tau",
    min: "-1",
    max: "1",
    step: "0.01",
    value: "0.7",
    "data-testid": "prompt-tau",
  }) as HTMLInputElement;
  const submit = el("button", { type: "submit", "data-testid": "prompt-submit" }, [
    state.busy ? "working..." : "apply prompt",
  ]) as HTMLButtonElement;
  submit.disabled = state.busy || !state.session;
  root.append(text, mode, tau, submit);

  const applied = el("ul", { class: "applied-prompts", "data-testid": "applied-prompts" });
  for (const prompt of state.session?.prompts ?? []) {
    applied.append(el("li", {}, [`${prompt.mode} "${prompt.text}" @ ${prompt.tau.toFixed(3)}`]));
  }
  root.append(applied);

  const counts = el("p", { class: "counts", "data-testid": "survivor-counts" }, [
    state.session
      ? `${state.session.survivor_count} of ${state.session.mask_count} masks surviving`
      : "",
  ]);
  root.append(counts);

  root.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!text.value) return;
    void store
      .applyPrompt(text.value, mode.value as "drop" | "keep", Number(tau.value))
      .catch(() => undefined);
  });
  return root;
}

export function renderJobConsole(state: ViewState, store: SessionStore): HTMLElement {
  const root = el("div", { class: "job-console", "data-testid": "job-console" });
  const form = el("form", { class: "job-form" });
  const quota = el("input", {
    type: "number",
    name: "quota",
    value: "8",
    min: "1",
    "data-testid": "resample-quota",
  }) as HTMLInputElement;
  const resample = el("button", { type: "button", "data-testid": "resample-submit" }, [
    "resample",
  ]) as HTMLButtonElement;
  resample.disabled = state.busy;
  resample.addEventListener("click", () => {
    const value = Number(quota.value);
    if (!Number.isInteger(value) || value < 1) {
      quota.setAttribute("data-invalid", "true");
      return;  // client-side validation: quota must be a positive integer
    }
    quota.removeAttribute("data-invalid");
    void store.resample(value).catch(() => undefined);
  });
  const k = el("input", {
    type: "number",
    name: "k",
    value: "50",
    min: "1",
    "data-testid": "recluster-k",
  }) as HTMLInputElement;
  const recluster = el("button", { type: "button", "data-testid": "recluster-submit" }, [
    "recluster",
  ]) as HTMLButtonElement;
  recluster.disabled = state.busy;
  recluster.addEventListener("click", () => {
    const value = Number(k.value);
    if (!Number.isInteger(value) || value < 1) {
      k.setAttribute("data-invalid", "true");
      return;
    }
    k.removeAttribute("data-invalid");
    void store.recluster(value).catch(() => undefined);
  });
  form.append(k, recluster, quota, resample);
  root.append(form);

  const list = el("ul", { class: "job-list", "data-testid": "job-list" });
  for (const job of state.jobs) {
    list.append(jobRow(job));
  }
  root.append(list);
  return root;
}

function jobRow(job: JobView): HTMLElement {
  const row = el("li", {
    class: `job job-${job.status}`,
    "data-job-id": job.id,
    "data-status": job.status,
  });
  row.append(`${job.kind} [${job.status}]`);
  if (job.status === "failed" && job.error) {
    row.append(el("pre", { class: "job-error" }, [JSON.stringify(job.error)]));
  }
  if (job.status === "done" && job.result) {
    row.append(el("pre", { class: "job-result" }, [JSON.stringify(job.result)]));
  }
  return row;
}

export function renderApp(root: HTMLElement, store: SessionStore): void {
  const draw = (state: ViewState) => {
    root.replaceChildren();
    if (state.error) {
      const banner = el("div", { class: "error-banner", "data-testid": "error-banner" }, [
        state.error,
      ]);
      const retry = el("button", { "data-testid": "error-retry" }, ["retry"]);
      retry.addEventListener("click", () => void store.refreshDerived().catch(() => undefined));
      banner.append(retry);
      root.append(banner);
    }
    root.append(renderPromptPanel(state, store));
    root.append(renderHistogram(state));
    root.append(renderClusterGrid(state, store));
    root.append(renderJobConsole(state, store));
  };
  store.subscribe(draw);
  draw(store.current);
}
