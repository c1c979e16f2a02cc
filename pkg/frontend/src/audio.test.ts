import { describe, expect, it } from "vitest";

import { PlaybackControl, type MidiPlayer } from "./audio.js";
import { parseMidi, type MidiNote } from "./midi.js";

class StubPlayer implements MidiPlayer {
  available = true;
  playing: MidiNote[] | null = null;
  onEnd: (() => void) | null = null;
  stops = 0;

  play(notes: MidiNote[], onEnd: () => void): void {
    this.playing = notes;
    this.onEnd = onEnd;
  }

  stop(): void {
    this.stops += 1;
    this.playing = null;
  }
}

/** Format-0 SMF with one C4 quarter at 120 bpm, division 480. */
function oneNoteMidi(): Uint8Array {
  return new Uint8Array([
    0x4d, 0x54, 0x68, 0x64, 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0,
    0x4d, 0x54, 0x72, 0x6b, 0, 0, 0, 12,
    0x00, 0x90, 60, 100,
    0x83, 0x60, 0x80, 60, 0,
    0x00, 0xff, 0x2f, 0x00,
  ]);
}

describe("parseMidi", () => {
  it("reads a single note with correct timing", () => {
    const notes = parseMidi(oneNoteMidi());
    expect(notes).toHaveLength(1);
    expect(notes[0].midi).toBe(60);
    expect(notes[0].start).toBe(0);
    expect(notes[0].duration).toBeCloseTo(0.5, 9); // 480 ticks at 120 bpm
  });

  it("rejects non-midi data", () => {
    expect(() => parseMidi(new Uint8Array([1, 2, 3, 4, 5, 6, 7, 8]))).toThrow(/MIDI/);
  });
});

describe("PlaybackControl", () => {
  it("play then immediate stop returns to idle without error", () => {
    const player = new StubPlayer();
    const phases: string[] = [];
    const control = new PlaybackControl(player, (phase) => phases.push(phase));
    control.play(parseMidi(oneNoteMidi()));
    expect(control.phase).toBe("playing");
    control.stop();
    expect(control.phase).toBe("idle");
    expect(player.stops).toBeGreaterThan(0);
    expect(phases).toEqual(["playing", "idle"]);
  });

  it("playback of a one-note score ends automatically", () => {
    const player = new StubPlayer();
    const control = new PlaybackControl(player);
    control.play(parseMidi(oneNoteMidi()));
    expect(player.playing).toHaveLength(1);
    player.onEnd?.(); // the player reports the natural end
    expect(control.phase).toBe("idle");
  });

  it("unavailable player disables playback", () => {
    const player = new StubPlayer();
    player.available = false;
    const control = new PlaybackControl(player);
    control.play([]);
    expect(control.phase).toBe("idle");
    expect(control.available).toBe(false);
  });

  it("toggle stops a running playback", () => {
    const player = new StubPlayer();
    const control = new PlaybackControl(player);
    const base64 = Buffer.from(oneNoteMidi()).toString("base64");
    control.toggle(base64);
    expect(control.phase).toBe("playing");
    control.toggle(base64);
    expect(control.phase).toBe("idle");
  });
});
