import { parseMidi, type MidiNote } from "./midi.js";

export interface MidiPlayer {
  readonly available: boolean;
  play(notes: MidiNote[], onEnd: () => void): void;
  stop(): void;
}

/** Plays the parsed rendition with plain oscillators; good enough to hear
 * the voice leading without shipping a soundfont. */
export class WebAudioPlayer implements MidiPlayer {
  private context: AudioContext | null = null;
  private nodes: OscillatorNode[] = [];
  private timer: ReturnType<typeof setTimeout> | null = null;

  get available(): boolean {
    return typeof AudioContext !== "undefined";
  }

  play(notes: MidiNote[], onEnd: () => void): void {
    if (!this.available) {
      onEnd();
      return;
    }
    this.stopInternal();
    this.context = this.context ?? new AudioContext();
    const t0 = this.context.currentTime + 0.05;
    let end = 0;
    for (const note of notes) {
      const osc = this.context.createOscillator();
      const gain = this.context.createGain();
      osc.type = "triangle";
      osc.frequency.value = 440 * Math.pow(2, (note.midi - 69) / 12);
      const start = t0 + note.start;
      const stop = start + Math.max(note.duration, 0.05);
      gain.gain.setValueAtTime(0.0001, start);
      gain.gain.linearRampToValueAtTime(0.12, start + 0.01);
      gain.gain.setTargetAtTime(0.0001, stop - 0.03, 0.02);
      osc.connect(gain).connect(this.context.destination);
      osc.start(start);
      osc.stop(stop + 0.05);
      this.nodes.push(osc);
      end = Math.max(end, note.start + note.duration);
    }
    this.timer = setTimeout(() => {
      this.stopInternal();
      onEnd();
    }, (end + 0.3) * 1000);
  }

  stop(): void {
    this.stopInternal();
  }

  private stopInternal(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    for (const node of this.nodes) {
      try {
        node.stop();
      } catch {
        // already stopped
      }
    }
    this.nodes = [];
  }
}

export type PlaybackPhase = "idle" | "playing";

/** Play/stop control around a player; stopping right after starting is a
 * no-op rather than an error, and playback returns to idle on its own. */
export class PlaybackControl {
  phase: PlaybackPhase = "idle";

  constructor(
    private readonly player: MidiPlayer,
    private readonly onChange: (phase: PlaybackPhase) => void = () => {},
  ) {}

  get available(): boolean {
    return this.player.available;
  }

  playBase64(midiBase64: string): MidiNote[] {
    const notes = parseMidi(midiBase64);
    this.play(notes);
    return notes;
  }

  play(notes: MidiNote[]): void {
    if (!this.player.available) {
      return;
    }
    this.player.stop();
    this.phase = "playing";
    this.onChange(this.phase);
    this.player.play(notes, () => {
      this.phase = "idle";
      this.onChange(this.phase);
    });
  }

  stop(): void {
    this.player.stop();
    if (this.phase !== "idle") {
      this.phase = "idle";
      this.onChange(this.phase);
    }
  }

  toggle(midiBase64: string): void {
    if (this.phase === "playing") {
      this.stop();
    } else {
      this.playBase64(midiBase64);
    }
  }
}
