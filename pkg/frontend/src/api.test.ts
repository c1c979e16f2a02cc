import { describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "./api.js";

function recordingFetch(payload: unknown, ok = true) {
  const calls: Array<{ url: string; method?: string }> = [];
  const fetchFn: FetchLike = (url, init) => {
    calls.push({ url, method: init?.method });
    return Promise.resolve({
      ok,
      status: ok ? 200 : 404,
      json: () => Promise.resolve(payload),
      text: () => Promise.resolve(String(payload)),
    } as Response);
  };
  return { calls, fetchFn };
}

describe("ApiClient", () => {
  it("builds explanation URLs with method and k", async () => {
    const { calls, fetchFn } = recordingFetch({ target_note_id: "n1" });
    const api = new ApiClient("http://x", fetchFn);
    await api.fetchExplanation("abc", "n1", "gbp", 7);
    expect(calls[0].url).toBe("http://x/api/scores/abc/explanations/n1?method=gbp&k=7");
    expect(calls[0].method).toBe("GET");
  });

  it("escapes note ids in URLs", async () => {
    const { calls, fetchFn } = recordingFetch({});
    const api = new ApiClient("", fetchFn);
    await api.fetchExplanation("abc", "a b", "ig", 10);
    expect(calls[0].url).toContain("/explanations/a%20b?");
  });

  it("reads are GETs; upload is the only POST", async () => {
    const { calls, fetchFn } = recordingFetch({ scores: [], predictions: {} });
    const api = new ApiClient("", fetchFn);
    await api.listScores();
    await api.fetchGraph("id");
    await api.fetchPredictions("id");
    await api.fetchMei("id");
    expect(calls.every((c) => c.method === "GET")).toBe(true);
    await api.uploadScore("<score/>");
    expect(calls.at(-1)?.method).toBe("POST");
  });

  it("raises on non-ok responses", async () => {
    const { fetchFn } = recordingFetch({ error: "score_not_found" }, false);
    const api = new ApiClient("", fetchFn);
    await expect(api.fetchGraph("missing")).rejects.toThrow(/404/);
  });
});
