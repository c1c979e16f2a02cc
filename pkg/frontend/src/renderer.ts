/** Engraving adapter: MEI in, SVG markup out, with note ids preserved. */

export interface ScoreRenderer {
  render(mei: string): Promise<string>;
  /** Base64 standard MIDI file of the last rendered score, if supported. */
  toMidi(): string | null;
}

interface VerovioToolkitLike {
  loadData(data: string): boolean;
  renderToSVG(page: number): string;
  renderToMIDI(): string;
  setOptions(options: Record<string, unknown>): void;
  getPageCount(): number;
}

export class VerovioRenderer implements ScoreRenderer {
  private toolkit: VerovioToolkitLike | null = null;
  private loaded = false;

  constructor(private readonly options: Record<string, unknown> = {}) {}

  private async ensureToolkit(): Promise<VerovioToolkitLike> {
    if (!this.toolkit) {
      const [{ default: createModule }, { VerovioToolkit }] = await Promise.all([
        import("verovio/wasm"),
        import("verovio/esm"),
      ]);
      const wasmModule = await createModule();
      this.toolkit = new VerovioToolkit(wasmModule) as VerovioToolkitLike;
      this.toolkit.setOptions({
        adjustPageHeight: true,
        svgHtml5: false,
        footer: "none",
        scale: 40,
        pageWidth: 2400,
        svgViewBox: true,
        ...this.options,
      });
    }
    return this.toolkit;
  }

  async render(mei: string): Promise<string> {
    const toolkit = await this.ensureToolkit();
    if (!toolkit.loadData(mei)) {
      throw new Error("engraving toolkit rejected the document");
    }
    this.loaded = true;
    let svg = "";
    const pages = toolkit.getPageCount();
    for (let page = 1; page <= pages; page++) {
      svg += toolkit.renderToSVG(page);
    }
    return svg;
  }

  toMidi(): string | null {
    if (!this.toolkit || !this.loaded) {
      return null;
    }
    return this.toolkit.renderToMIDI();
  }
}

/** Mount SVG markup and return the root SVG element. Parsed as XML: HTML
 * parsing mangles the engraver's nested <svg> structure in some DOM
 * implementations. */
export function mountSvg(container: Element, svgMarkup: string): Element {
  const doc = container.ownerDocument;
  const win = doc.defaultView as unknown as { DOMParser?: typeof DOMParser } | null;
  const Parser = win?.DOMParser ?? (typeof DOMParser !== "undefined" ? DOMParser : null);
  if (Parser) {
    const parsed = new Parser().parseFromString(svgMarkup, "image/svg+xml");
    const root = parsed.documentElement;
    if (root && root.tagName.toLowerCase() === "svg") {
      const adopted = doc.importNode(root, true);
      container.replaceChildren(adopted);
      return adopted as unknown as Element;
    }
  }
  container.innerHTML = svgMarkup;
  const root = container.querySelector("svg");
  if (!root) {
    throw new Error("no svg element in rendered output");
  }
  return root;
}

/** Ids from the rendered SVG that correspond to known note ids. */
export function renderedNoteIds(svgRoot: Element, knownIds: Iterable<string>): string[] {
  const present: string[] = [];
  for (const id of knownIds) {
    if (svgRoot.querySelector(`[id="${id.replace(/["\\]/g, "\\$&")}"]`)) {
      present.push(id);
    }
  }
  return present;
}

/** Delegate clicks on note glyphs to a handler receiving the note id. */
export function attachNoteClicks(
  svgRoot: Element,
  knownIds: Set<string>,
  handler: (noteId: string) => void,
): void {
  svgRoot.addEventListener("click", (event) => {
    let node = event.target as Element | null;
    while (node && node !== svgRoot) {
      const id = node.getAttribute?.("id");
      if (id && knownIds.has(id)) {
        handler(id);
        return;
      }
      node = node.parentElement;
    }
  });
}

export function highlightNote(svgRoot: Element, noteId: string | null): void {
  for (const el of svgRoot.querySelectorAll("[data-cadgraph-highlight]")) {
    el.removeAttribute("data-cadgraph-highlight");
    (el as unknown as { style?: { fill: string } }).style &&
      ((el as unknown as { style: { fill: string } }).style.fill = "");
  }
  if (noteId === null) {
    return;
  }
  const target = svgRoot.querySelector(`[id="${noteId.replace(/["\\]/g, "\\$&")}"]`);
  if (target) {
    target.setAttribute("data-cadgraph-highlight", "1");
    (target as unknown as { style?: { fill: string } }).style &&
      ((target as unknown as { style: { fill: string } }).style.fill = "#d62728");
  }
}
