import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, pollJob } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("posts session bodies to /sessions", async () => {
    const fetcher = vi.fn(async () => jsonResponse({ id: "s-1", version: 0 }));
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    await client.createSession({ mask_path: "m.jsonl", embedding_path: "e.bin" });
    expect(fetcher).toHaveBeenCalledWith(
      "http://svc/sessions",
      expect.objectContaining({ method: "POST" }),
    );
    const body = JSON.parse((fetcher.mock.calls[0] as unknown[])[1]!["body"] as string);
    expect(body.mask_path).toBe("m.jsonl");
  });

  it("encodes cluster mask paging parameters", async () => {
    const fetcher = vi.fn(async () => jsonResponse({ mask_ids: [] }));
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    await client.getClusterMasks("s-1", 3, 2, 10);
    expect(fetcher.mock.calls[0][0]).toBe(
      "http://svc/sessions/s-1/clusters/3/masks?page=2&page_size=10",
    );
  });

  it("maps error bodies onto ApiError", async () => {
    const fetcher = vi.fn(async () =>
      jsonResponse({ code: "VocabularyError", message: "unknown token" }, 400),
    );
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    await expect(client.postPrompt("s-1", "dragon", "drop", 0.5)).rejects.toMatchObject({
      status: 400,
      body: { code: "VocabularyError" },
    });
  });

  it("builds thumbnail urls from mask ids", () => {
    const client = new ApiClient("http://svc");
    expect(client.thumbUrl("frame-0001/m03")).toBe(
      "http://svc/masks/frame-0001/m03/thumb.png",
    );
  });

  it("passes the optimistic-concurrency version through mutations", async () => {
    const fetcher = vi.fn(async () => jsonResponse({ result: {}, session: {} }));
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    await client.recluster("s-1", 12, 7);
    const body = JSON.parse((fetcher.mock.calls[0] as unknown[])[1]!["body"] as string);
    expect(body).toEqual({ k: 12, version: 7 });
  });
});

describe("pollJob", () => {
  it("resolves once the job is terminal", async () => {
    const statuses = ["queued", "running", "done"];
    let call = 0;
    const fetcher = vi.fn(async () =>
      jsonResponse({ id: "j-1", status: statuses[Math.min(call++, 2)] }),
    );
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    const job = await pollJob(client, "j-1", 1);
    expect(job.status).toBe("done");
    expect(call).toBe(3);
  });

  it("returns failed jobs instead of hanging", async () => {
    const fetcher = vi.fn(async () =>
      jsonResponse({ id: "j-2", status: "failed", error: { code: "X", message: "boom" } }),
    );
    const client = new ApiClient("http://svc", fetcher as unknown as typeof fetch);
    const job = await pollJob(client, "j-2", 1);
    expect(job.status).toBe("failed");
    expect(job.error?.message).toBe("boom");
  });
});
