// Edit history with replay-based undo, plus single-flight request
// coalescing. The server stays stateless beyond content ids: the client's
// stroke history is the source of truth, and undo re-derives the current
// normal map by replaying what remains from the base map.

import type { EditServiceClient, StrokePayload } from "./api.js";

export interface StudioState {
  normalId: string;
  previewPng: string | null;
  history: StrokePayload[][];
}

export class EditHistory {
  private state: StudioState = { normalId: "base", previewPng: null, history: [] };
  private busy = false;
  private queued: StrokePayload[] = [];
  private listeners: Array<(s: StudioState) => void> = [];

  constructor(private client: EditServiceClient) {}

  snapshot(): StudioState {
    return {
      normalId: this.state.normalId,
      previewPng: this.state.previewPng,
      history: this.state.history.map((s) => [...s]),
    };
  }

  onChange(listener: (s: StudioState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const l of this.listeners) l(snap);
  }

  /** Apply strokes; while a request is in flight, later gestures coalesce. */
  async paint(strokes: StrokePayload[]): Promise<void> {
    if (strokes.length === 0) return;
    if (this.busy) {
      this.queued.push(...strokes);
      return;
    }
    this.busy = true;
    try {
      const id = await this.client.paint(this.state.normalId, strokes);
      this.state.history.push([...strokes]);
      this.state.normalId = id;
      this.state.previewPng = await this.client.reshade(id);
      this.emit();
    } finally {
      this.busy = false;
    }
    if (this.queued.length > 0) {
      const pending = this.queued;
      this.queued = [];
      await this.paint(pending); // one coalesced request
    }
  }

  /** Pop the last stroke batch and replay the remainder from the base map. */
  async undo(): Promise<void> {
    if (this.state.history.length === 0 || this.busy) return;
    this.busy = true;
    try {
      const remainder = this.state.history.slice(0, -1);
      const flattened = remainder.flat();
      const id =
        flattened.length === 0 ? "base" : await this.client.paint("base", flattened);
      this.state.history = remainder;
      this.state.normalId = id;
      this.state.previewPng = await this.client.reshade(id);
      this.emit();
    } finally {
      this.busy = false;
    }
  }

  /** Rebuild the current state from scratch; must reproduce the same preview. */
  async replayAll(): Promise<string> {
    const flattened = this.state.history.flat();
    const id = flattened.length === 0 ? "base" : await this.client.paint("base", flattened);
    return this.client.reshade(id);
  }
}
