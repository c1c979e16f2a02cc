import type { ExplanationPayload, GraphPayload, OverlayLine, Relation } from "./types.js";
import { RELATIONS } from "./types.js";

export const RELATION_COLORS: Record<Relation, string> = {
  onset: "#1f77b4",
  consecutive: "#2ca02c",
  during: "#ff7f0e",
  rest: "#9467bd",
};

export const OVERLAY_ID = "cadgraph-overlay";
const SVG_NS = "http://www.w3.org/2000/svg";

export function explanationToLines(payload: ExplanationPayload): OverlayLine[] {
  const lines: OverlayLine[] = [];
  for (const relation of RELATIONS) {
    for (const edge of payload.edges[relation] ?? []) {
      lines.push({ src: edge.src_id, dst: edge.dst_id, relation, score: edge.score });
    }
  }
  return lines;
}

export function graphToLines(graph: GraphPayload): OverlayLine[] {
  const lines: OverlayLine[] = [];
  for (const relation of RELATIONS) {
    for (const [src, dst] of graph.edges[relation] ?? []) {
      lines.push({
        src: graph.node_ids[src],
        dst: graph.node_ids[dst],
        relation,
        score: 1.0,
      });
    }
  }
  return lines;
}

/** Center of a rendered note in the SVG's own coordinate space. Verovio
 * noteheads are <use> glyphs with x/y attributes; getBBox is used when the
 * environment provides a layout engine. */
export function noteCenter(root: Element, noteId: string): { x: number; y: number } | null {
  const node = findById(root, noteId);
  if (!node) {
    return null;
  }
  const use = node.querySelector("use");
  if (use) {
    const x = parseFloat(use.getAttribute("x") ?? "");
    const y = parseFloat(use.getAttribute("y") ?? "");
    if (Number.isFinite(x) && Number.isFinite(y)) {
      return { x: x + 120, y };
    }
  }
  const boxed = node as unknown as { getBBox?: () => { x: number; y: number; width: number; height: number } };
  if (typeof boxed.getBBox === "function") {
    const box = boxed.getBBox();
    return { x: box.x + box.width / 2, y: box.y + box.height / 2 };
  }
  return null;
}

function findById(root: Element, id: string): Element | null {
  const doc = root.ownerDocument;
  const hit = doc?.getElementById ? doc.getElementById(id) : null;
  if (hit && root.contains(hit)) {
    return hit;
  }
  return root.querySelector(`[id="${cssEscape(id)}"]`);
}

function cssEscape(value: string): string {
  return value.replace(/["\\]/g, "\\$&");
}

export interface DrawResult {
  drawn: number;
  missing: string[];
}

/** Replace the overlay layer with one dashed line per edge. Lines without
 * two locatable endpoints are skipped and reported in `missing`. */
export function drawOverlay(
  svgRoot: Element,
  lines: OverlayLine[],
  opts: { dashed?: boolean } = {},
): DrawResult {
  const doc = svgRoot.ownerDocument;
  clearOverlay(svgRoot);
  const layer = doc.createElementNS(SVG_NS, "g");
  layer.setAttribute("id", OVERLAY_ID);
  const maxScore = lines.reduce((m, l) => Math.max(m, l.score), 0);
  let drawn = 0;
  const missing: string[] = [];
  for (const line of lines) {
    const a = noteCenter(svgRoot, line.src);
    const b = noteCenter(svgRoot, line.dst);
    if (!a || !b) {
      if (!a) missing.push(line.src);
      if (!b) missing.push(line.dst);
      continue;
    }
    const el = doc.createElementNS(SVG_NS, "line");
    el.setAttribute("x1", String(a.x));
    el.setAttribute("y1", String(a.y));
    el.setAttribute("x2", String(b.x));
    el.setAttribute("y2", String(b.y));
    el.setAttribute("stroke", RELATION_COLORS[line.relation]);
    el.setAttribute("stroke-width", "28");
    if (opts.dashed !== false) {
      el.setAttribute("stroke-dasharray", "60 40");
    }
    const opacity = maxScore > 0 ? 0.25 + 0.75 * (line.score / maxScore) : 0.6;
    el.setAttribute("stroke-opacity", opacity.toFixed(3));
    el.setAttribute("data-relation", line.relation);
    layer.appendChild(el);
    drawn += 1;
  }
  svgRoot.appendChild(layer);
  return { drawn, missing };
}

export function clearOverlay(svgRoot: Element): void {
  const previous = svgRoot.querySelector(`#${OVERLAY_ID}`);
  if (previous) {
    previous.remove();
  }
}

export function overlayLineCount(svgRoot: Element): number {
  const layer = svgRoot.querySelector(`#${OVERLAY_ID}`);
  return layer ? layer.querySelectorAll("line").length : 0;
}
