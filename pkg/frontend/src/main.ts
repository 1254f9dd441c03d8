/**
 * Boot: read the service URL and session parameters from the query string,
 * open or create a session, and mount the app.
 *
 *   index.html?service=http://127.0.0.1:8321&session=s-abc123
 *   index.html?service=...&masks=/path/masks.jsonl&embeddings=/path/embeddings.bin
 */

import { ApiClient } from "./api.js";
import { SessionStore } from "./state.js";
import { renderApp } from "./ui.js";

export async function boot(root: HTMLElement, query: URLSearchParams): Promise<SessionStore> {
  const service = query.get("service") ?? "http://127.0.0.1:8321";
  const client = new ApiClient(service);
  const store = new SessionStore(client);
  renderApp(root, store);
  const sessionId = query.get("session");
  if (sessionId) {
    await store.open(sessionId);
  } else {
    const masks = query.get("masks");
    const embeddings = query.get("embeddings");
    if (masks && embeddings) {
      await store.create({
        mask_path: masks,
        embedding_path: embeddings,
        frames_dir: query.get("frames") ?? undefined,
      });
    }
  }
  const timer = setInterval(() => void store.pollJobs().catch(() => undefined), 1000);
  window.addEventListener("beforeunload", () => clearInterval(timer));
  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(
    document.getElementById("app") as HTMLElement,
    new URLSearchParams(window.location.search),
  );
}
