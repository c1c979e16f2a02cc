/** Minimal standard-MIDI-file reader: enough to turn the engraving
 * toolkit's rendition into schedulable (pitch, start, duration) events. */

export interface MidiNote {
  midi: number;
  start: number; // seconds
  duration: number; // seconds
}

export function decodeBase64(data: string): Uint8Array {
  if (typeof atob === "function") {
    const binary = atob(data);
    const bytes = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) {
      bytes[i] = binary.charCodeAt(i);
    }
    return bytes;
  }
  return new Uint8Array(Buffer.from(data, "base64"));
}

class Reader {
  pos = 0;
  constructor(private readonly bytes: Uint8Array) {}

  u8(): number {
    return this.bytes[this.pos++];
  }

  u16(): number {
    return (this.u8() << 8) | this.u8();
  }

  u32(): number {
    return (this.u16() << 16) | this.u16();
  }

  varlen(): number {
    let value = 0;
    for (;;) {
      const byte = this.u8();
      value = (value << 7) | (byte & 0x7f);
      if (!(byte & 0x80)) {
        return value;
      }
    }
  }

  skip(n: number): void {
    this.pos += n;
  }

  get done(): boolean {
    return this.pos >= this.bytes.length;
  }

  slice(n: number): Reader {
    const sub = new Reader(this.bytes.subarray(this.pos, this.pos + n));
    this.pos += n;
    return sub;
  }

  ascii(n: number): string {
    let out = "";
    for (let i = 0; i < n; i++) {
      out += String.fromCharCode(this.u8());
    }
    return out;
  }
}

interface RawEvent {
  tick: number;
  kind: "on" | "off" | "tempo";
  midi?: number;
  usPerQuarter?: number;
}

export function parseMidi(data: Uint8Array | string): MidiNote[] {
  const bytes = typeof data === "string" ? decodeBase64(data) : data;
  const reader = new Reader(bytes);
  if (reader.ascii(4) !== "MThd") {
    throw new Error("not a standard MIDI file");
  }
  const headerLength = reader.u32();
  reader.u16(); // format
  const nTracks = reader.u16();
  const division = reader.u16();
  reader.skip(headerLength - 6);
  if (division & 0x8000) {
    throw new Error("SMPTE time division is not supported");
  }

  const events: RawEvent[] = [];
  for (let t = 0; t < nTracks; t++) {
    if (reader.ascii(4) !== "MTrk") {
      throw new Error("missing MTrk chunk");
    }
    const track = reader.slice(reader.u32());
    let tick = 0;
    let running = 0;
    while (!track.done) {
      tick += track.varlen();
      let status = track.u8();
      if (status < 0x80) {
        track.pos -= 1;
        status = running;
      } else {
        running = status;
      }
      const type = status & 0xf0;
      if (type === 0x90 || type === 0x80) {
        const note = track.u8();
        const velocity = track.u8();
        const on = type === 0x90 && velocity > 0;
        events.push({ tick, kind: on ? "on" : "off", midi: note });
      } else if (type === 0xa0 || type === 0xb0 || type === 0xe0) {
        track.skip(2);
      } else if (type === 0xc0 || type === 0xd0) {
        track.skip(1);
      } else if (status === 0xff) {
        const meta = track.u8();
        const length = track.varlen();
        if (meta === 0x51 && length === 3) {
          const usPerQuarter = (track.u8() << 16) | (track.u8() << 8) | track.u8();
          events.push({ tick, kind: "tempo", usPerQuarter });
        } else {
          track.skip(length);
        }
      } else if (status === 0xf0 || status === 0xf7) {
        track.skip(track.varlen());
      } else {
        throw new Error(`unsupported status byte 0x${status.toString(16)}`);
      }
    }
  }

  events.sort((a, b) => a.tick - b.tick);
  // Tick -> seconds under the tempo map (default 120 bpm).
  let usPerQuarter = 500000;
  let lastTick = 0;
  let lastSeconds = 0;
  const toSeconds = (tick: number) =>
    lastSeconds + ((tick - lastTick) * usPerQuarter) / (division * 1e6);

  const open = new Map<number, number[]>();
  const notes: MidiNote[] = [];
  for (const event of events) {
    const seconds = toSeconds(event.tick);
    if (event.kind === "tempo") {
      lastSeconds = seconds;
      lastTick = event.tick;
      usPerQuarter = event.usPerQuarter!;
    } else if (event.kind === "on") {
      const stack = open.get(event.midi!) ?? [];
      stack.push(seconds);
      open.set(event.midi!, stack);
    } else {
      const stack = open.get(event.midi!);
      const start = stack?.pop();
      if (start !== undefined) {
        notes.push({ midi: event.midi!, start, duration: Math.max(seconds - start, 0) });
      }
    }
  }
  notes.sort((a, b) => a.start - b.start || a.midi - b.midi);
  return notes;
}
