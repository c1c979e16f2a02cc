import { ApiClient } from "./api.js";
import { PlaybackControl, WebAudioPlayer } from "./audio.js";
import { chartBarCount, renderFeatureChart } from "./chart.js";
import { drawOverlay } from "./overlay.js";
import {
  VerovioRenderer,
  attachNoteClicks,
  highlightNote,
  mountSvg,
} from "./renderer.js";
import { ViewController } from "./state.js";
import type { ExplanationPayload } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const renderer = new VerovioRenderer();
  const scoreContainer = el<HTMLDivElement>("score");
  const chartContainer = el<HTMLDivElement>("chart");
  const banner = el<HTMLDivElement>("banner");
  const scoreSelect = el<HTMLSelectElement>("score-select");
  const methodSelect = el<HTMLSelectElement>("method-select");
  const kInput = el<HTMLInputElement>("k-input");
  const modeButton = el<HTMLButtonElement>("mode-toggle");
  const playButton = el<HTMLButtonElement>("play-toggle");
  const status = el<HTMLSpanElement>("status");

  let svgRoot: Element | null = null;
  let knownIds = new Set<string>();

  const controller = new ViewController(api, {
    draw(lines, dashed) {
      if (svgRoot) {
        const result = drawOverlay(svgRoot, lines, { dashed });
        status.textContent = `${result.drawn} edges drawn`;
      }
    },
    chart(payload: ExplanationPayload | null) {
      if (payload) {
        renderFeatureChart(chartContainer, payload.features.target);
        status.textContent += `, ${chartBarCount(chartContainer)} features`;
      } else {
        chartContainer.replaceChildren();
      }
    },
    banner(message, kind) {
      banner.textContent = message ?? "";
      banner.className = message ? `banner ${kind ?? "error"}` : "banner hidden";
    },
    highlight(noteId) {
      if (svgRoot) {
        highlightNote(svgRoot, noteId);
      }
    },
  });

  const playback = new PlaybackControl(new WebAudioPlayer(), (phase) => {
    playButton.textContent = phase === "playing" ? "Stop" : "Play";
  });
  if (!playback.available) {
    playButton.disabled = true;
    playButton.title = "audio unavailable in this browser";
  }

  async function openScore(scoreId: string): Promise<void> {
    playback.stop();
    const mei = await api.fetchMei(scoreId);
    let markup: string;
    try {
      markup = await renderer.render(mei);
    } catch (err) {
      banner.textContent = `engraving failed: ${String(err)}`;
      banner.className = "banner error";
      return;
    }
    svgRoot = mountSvg(scoreContainer, markup);
    const predictions = await api.fetchPredictions(scoreId);
    knownIds = new Set(Object.keys(predictions.predictions));
    attachNoteClicks(svgRoot, knownIds, (noteId) => {
      void controller.selectNote(noteId);
    });
    await controller.openScore(scoreId);
  }

  modeButton.addEventListener("click", () => {
    const next = controller.state.mode === "explanation" ? "input_edges" : "explanation";
    modeButton.textContent = next === "explanation" ? "Show input edges" : "Show explanation";
    void controller.setMode(next);
  });
  methodSelect.addEventListener("change", () => {
    void controller.setMethod(methodSelect.value);
  });
  kInput.addEventListener("change", () => {
    const k = parseInt(kInput.value, 10);
    if (Number.isFinite(k) && k >= 1) {
      void controller.setK(k);
    }
  });
  playButton.addEventListener("click", () => {
    const midi = renderer.toMidi();
    if (midi) {
      playback.toggle(midi);
    }
  });
  scoreSelect.addEventListener("change", () => {
    void openScore(scoreSelect.value);
  });

  const { scores } = await api.listScores();
  scoreSelect.replaceChildren(
    ...scores.map((id) => {
      const option = document.createElement("option");
      option.value = id;
      option.textContent = id;
      return option;
    }),
  );
  if (scores.length) {
    await openScore(scores[0]);
  } else {
    banner.textContent = "no scores in the store; upload one via POST /api/scores";
    banner.className = "banner info";
  }
}

void boot();
