import type { ExplanationPayload, GraphPayload, PredictionsPayload } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client for the score service; every read is a GET. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string, signal?: AbortSignal): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, { method: "GET", signal });
    if (!response.ok) {
      throw new Error(`GET ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listScores(): Promise<{ scores: string[] }> {
    return this.getJson("/api/scores");
  }

  async uploadScore(body: BodyInit): Promise<{ score_id: string }> {
    const response = await this.fetchFn(this.baseUrl + "/api/scores", {
      method: "POST",
      body,
    });
    if (!response.ok) {
      throw new Error(`upload failed: ${response.status}`);
    }
    return (await response.json()) as { score_id: string };
  }

  async fetchMei(scoreId: string): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}/api/scores/${scoreId}/mei`, {
      method: "GET",
    });
    if (!response.ok) {
      throw new Error(`mei fetch failed: ${response.status}`);
    }
    return await response.text();
  }

  fetchGraph(scoreId: string): Promise<GraphPayload> {
    return this.getJson(`/api/scores/${scoreId}/graph`);
  }

  fetchPredictions(scoreId: string): Promise<PredictionsPayload> {
    return this.getJson(`/api/scores/${scoreId}/predictions`);
  }

  fetchExplanation(
    scoreId: string,
    noteId: string,
    method: string,
    k: number,
    signal?: AbortSignal,
  ): Promise<ExplanationPayload> {
    const query = `method=${encodeURIComponent(method)}&k=${k}`;
    return this.getJson(
      `/api/scores/${scoreId}/explanations/${encodeURIComponent(noteId)}?${query}`,
      signal,
    );
  }
}
