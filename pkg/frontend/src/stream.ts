// Live session stream with reconnect-and-replay.  On every reconnect
// the request carries ?since=<last seen seq>, so the server replays the
// gap and mergeEvents drops anything already held.

import { mergeEvents, nextCursor } from "./timeline.js";
import type { SessionEvent } from "./types.js";

export interface StreamHandle {
  close(): void;
}

export type SourceFactory = (
  url: string,
  onMessage: (payload: string) => void,
  onError: () => void,
) => StreamHandle;

const eventSourceFactory: SourceFactory = (url, onMessage, onError) => {
  const source = new EventSource(url);
  source.onmessage = (event) => onMessage(event.data as string);
  source.onerror = () => onError();
  return { close: () => source.close() };
};

export class SessionEventStream {
  events: SessionEvent[] = [];
  retries = 0;
  private handle: StreamHandle | null = null;
  private closed = false;

  constructor(
    private sessionId: string,
    private onUpdate: (events: SessionEvent[]) => void,
    private factory: SourceFactory = eventSourceFactory,
    private maxRetries = 10,
    private schedule: (fn: () => void, ms: number) => void = (fn, ms) => setTimeout(fn, ms),
  ) {}

  url(): string {
    return `/api/sessions/${this.sessionId}/events?since=${nextCursor(this.events)}`;
  }

  connect(): void {
    if (this.closed) return;
    this.handle = this.factory(
      this.url(),
      (payload) => this.receive(payload),
      () => this.reconnect(),
    );
  }

  private receive(payload: string): void {
    let event: SessionEvent;
    try {
      event = JSON.parse(payload) as SessionEvent;
    } catch {
      return; // malformed frame, skip
    }
    this.retries = 0;
    this.events = mergeEvents(this.events, [event]);
    this.onUpdate(this.events);
  }

  private reconnect(): void {
    this.handle?.close();
    this.handle = null;
    if (this.closed || this.retries >= this.maxRetries) return;
    const delay = Math.min(500 * 2 ** this.retries, 15_000);
    this.retries += 1;
    this.schedule(() => this.connect(), delay);
  }

  close(): void {
    this.closed = true;
    this.handle?.close();
    this.handle = null;
  }
}
