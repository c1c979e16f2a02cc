declare module "verovio/wasm" {
  const createModule: () => Promise<unknown>;
  export default createModule;
}

declare module "verovio/esm" {
  export class VerovioToolkit {
    constructor(module: unknown);
    loadData(data: string): boolean;
    renderToSVG(page: number): string;
    renderToMIDI(): string;
    setOptions(options: Record<string, unknown>): void;
    getPageCount(): number;
    getVersion(): string;
  }
}
