import type { FeatureScore } from "./types.js";

/** Horizontal bar chart of feature importances, strongest first.
 * Returns the number of bars rendered. */
export function renderFeatureChart(container: Element, features: FeatureScore[]): number {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const maxScore = features.reduce((m, f) => Math.max(m, f.score), 0);
  for (const feature of features) {
    const row = doc.createElement("div");
    row.className = "feature-row";

    const label = doc.createElement("span");
    label.className = "feature-name";
    label.textContent = feature.name;

    const track = doc.createElement("div");
    track.className = "feature-track";
    const bar = doc.createElement("div");
    bar.className = "feature-bar";
    const percent = maxScore > 0 ? (100 * feature.score) / maxScore : 0;
    bar.style.width = `${percent.toFixed(1)}%`;
    track.appendChild(bar);

    const value = doc.createElement("span");
    value.className = "feature-value";
    value.textContent = feature.score.toExponential(2);

    row.append(label, track, value);
    container.appendChild(row);
  }
  return features.length;
}

export function chartBarCount(container: Element): number {
  return container.querySelectorAll(".feature-bar").length;
}
