// Event timeline logic: merging replayed and live events into an
// ordered, duplicate-free sequence keyed by seq.

import type { SessionEvent } from "./types.js";

export function mergeEvents(existing: SessionEvent[], incoming: SessionEvent[]): SessionEvent[] {
  const bySeq = new Map<number, SessionEvent>();
  for (const event of existing) bySeq.set(event.seq, event);
  for (const event of incoming) bySeq.set(event.seq, event);
  return [...bySeq.values()].sort((a, b) => a.seq - b.seq);
}

export function nextCursor(events: SessionEvent[]): number {
  return events.length ? events[events.length - 1].seq : 0;
}

export interface TimelineEntry {
  seq: number;
  kind: string;
  label: string;
  detail: string;
}

function str(value: unknown): string {
  return value === null || value === undefined ? "" : String(value);
}

export function describeEvent(event: SessionEvent): TimelineEntry {
  const data = event.data as Record<string, any>;
  let label = event.kind;
  let detail = "";
  switch (event.kind) {
    case "StepStarted":
      label = str(data.state);
      detail = data.cursor === null || data.cursor === undefined ? "" : `item ${data.cursor}`;
      break;
    case "AgentCalled":
      label = `${str(data.role)} call`;
      detail = data.error
        ? `failed: ${str(data.error)}`
        : `${str(data.purpose)}${data.target ? " " + str(data.target.kind) : ""}`;
      break;
    case "CompileChecked":
      label = `compile ${str(data.status)}`;
      detail = `${str(data.purpose)}${data.target ? " " + str(data.target.kind) : ""}`;
      break;
    case "DecisionRequested":
      label = "decision needed";
      detail = str(data.context?.kind);
      break;
    case "DecisionApplied":
      label = "decision applied";
      detail = str(data.type);
      break;
    case "VerdictReached":
      label = "verdict";
      detail = str(data.verdict?.kind);
      break;
  }
  return { seq: event.seq, kind: event.kind, label, detail };
}

export function latestDecisionContext(events: SessionEvent[]): {
  context: Record<string, any>;
  seq: number;
} | null {
  for (let i = events.length - 1; i >= 0; i--) {
    const event = events[i];
    if (event.kind === "DecisionApplied" || event.kind === "VerdictReached") return null;
    if (event.kind === "DecisionRequested") {
      return { context: (event.data as Record<string, any>).context, seq: event.seq };
    }
  }
  return null;
}
