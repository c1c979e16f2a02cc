import type { ApiClient } from "./api.js";
import { explanationToLines, graphToLines } from "./overlay.js";
import type {
  ExplanationPayload,
  GraphPayload,
  OverlayLine,
  PredictionsPayload,
} from "./types.js";

export type Mode = "input_edges" | "explanation";

export interface ViewState {
  scoreId: string | null;
  mode: Mode;
  selectedNote: string | null;
  method: string;
  k: number;
  overlay: OverlayLine[];
}

export interface ViewHooks {
  draw(lines: OverlayLine[], dashed: boolean): void;
  chart(payload: ExplanationPayload | null): void;
  banner(message: string | null, kind?: "error" | "info"): void;
  highlight(noteId: string | null): void;
}

/** Drives the viewer: one selected note, one overlay, explanation cache,
 * and at most one in-flight explanation request (later clicks cancel
 * earlier ones). Mode toggling alone never touches the network. */
export class ViewController {
  readonly state: ViewState = {
    scoreId: null,
    mode: "explanation",
    selectedNote: null,
    method: "ig",
    k: 10,
    overlay: [],
  };

  private cache = new Map<string, ExplanationPayload>();
  private graph: GraphPayload | null = null;
  private predictions: PredictionsPayload | null = null;
  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly hooks: ViewHooks,
  ) {}

  private cacheKey(noteId: string): string {
    return `${this.state.scoreId}|${noteId}|${this.state.method}|${this.state.k}`;
  }

  async openScore(scoreId: string): Promise<void> {
    this.inflight?.abort();
    this.inflight = null;
    this.state.scoreId = scoreId;
    this.state.selectedNote = null;
    this.state.overlay = [];
    this.cache.clear();
    this.graph = null;
    this.predictions = null;
    this.hooks.highlight(null);
    this.hooks.chart(null);
    this.applyOverlay();
    if (this.state.mode === "input_edges") {
      await this.showInputEdges();
    }
  }

  async ensureGraph(): Promise<GraphPayload> {
    if (!this.graph) {
      if (!this.state.scoreId) {
        throw new Error("no score selected");
      }
      this.graph = await this.api.fetchGraph(this.state.scoreId);
    }
    return this.graph;
  }

  async ensurePredictions(): Promise<PredictionsPayload> {
    if (!this.predictions) {
      if (!this.state.scoreId) {
        throw new Error("no score selected");
      }
      this.predictions = await this.api.fetchPredictions(this.state.scoreId);
    }
    return this.predictions;
  }

  /** Explanation-mode click: fetch (or reuse) the explanation for the note
   * and replace the overlay and feature chart. */
  async selectNote(noteId: string): Promise<void> {
    if (!this.state.scoreId) {
      return;
    }
    this.state.selectedNote = noteId;
    this.hooks.highlight(noteId);
    if (this.state.mode !== "explanation") {
      return;
    }
    const predictions = await this.ensurePredictions().catch(() => null);
    if (predictions && !(noteId in predictions.predictions)) {
      this.hooks.banner(`note ${noteId} has no prediction entry`, "info");
    }
    const key = this.cacheKey(noteId);
    const cached = this.cache.get(key);
    if (cached) {
      this.showExplanation(cached);
      return;
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const payload = await this.api.fetchExplanation(
        this.state.scoreId,
        noteId,
        this.state.method,
        this.state.k,
        controller.signal,
      );
      if (controller.signal.aborted) {
        return;
      }
      this.cache.set(key, payload);
      this.showExplanation(payload);
    } catch (err) {
      if (controller.signal.aborted) {
        return; // superseded by a later click
      }
      this.state.overlay = [];
      this.applyOverlay();
      this.hooks.banner(`explanation request failed: ${String(err)}`, "error");
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  private showExplanation(payload: ExplanationPayload): void {
    this.state.overlay = explanationToLines(payload);
    this.hooks.banner(null);
    this.applyOverlay();
    this.hooks.chart(payload);
  }

  /** Toggle between the input-edge view and the explanation view. Cached
   * explanations are restored without any new request. */
  async setMode(mode: Mode): Promise<void> {
    if (mode === this.state.mode) {
      return;
    }
    this.state.mode = mode;
    if (mode === "input_edges") {
      await this.showInputEdges();
      return;
    }
    const note = this.state.selectedNote;
    const cached = note ? this.cache.get(this.cacheKey(note)) : undefined;
    if (cached) {
      this.showExplanation(cached);
    } else if (note) {
      await this.selectNote(note);
    } else {
      this.state.overlay = [];
      this.applyOverlay();
    }
  }

  async setMethod(method: string): Promise<void> {
    this.state.method = method;
    if (this.state.mode === "explanation" && this.state.selectedNote) {
      await this.selectNote(this.state.selectedNote);
    }
  }

  async setK(k: number): Promise<void> {
    this.state.k = k;
    if (this.state.mode === "explanation" && this.state.selectedNote) {
      await this.selectNote(this.state.selectedNote);
    }
  }

  private async showInputEdges(): Promise<void> {
    try {
      const graph = await this.ensureGraph();
      this.state.overlay = graphToLines(graph);
      this.hooks.banner(null);
      this.applyOverlay();
    } catch (err) {
      this.state.overlay = [];
      this.applyOverlay();
      this.hooks.banner(`graph request failed: ${String(err)}`, "error");
    }
  }

  private applyOverlay(): void {
    this.hooks.draw(this.state.overlay, this.state.mode === "explanation");
    this.checkInvariant();
  }

  private checkInvariant(): void {
    const allowed =
      this.state.mode === "input_edges" ||
      (this.state.mode === "explanation" && this.state.selectedNote !== null);
    if (this.state.overlay.length > 0 && !allowed) {
      throw new Error("overlay present without a selection or input-edge mode");
    }
  }
}
