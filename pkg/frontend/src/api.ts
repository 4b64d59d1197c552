// Thin fetch wrappers over the server endpoints.

import { classifyDecisionResponse, type DecisionOutcome } from "./decisions.js";
import type { DecisionPayload, Report, SessionSummary } from "./types.js";

export async function listSessions(): Promise<SessionSummary[]> {
  const resp = await fetch("/api/sessions");
  if (!resp.ok) throw new Error(`sessions list failed: ${resp.status}`);
  return (await resp.json()) as SessionSummary[];
}

export async function getSession(sessionId: string): Promise<SessionSummary> {
  const resp = await fetch(`/api/sessions/${sessionId}`);
  if (!resp.ok) throw new Error(`session fetch failed: ${resp.status}`);
  return (await resp.json()) as SessionSummary;
}

export async function getReport(sessionId: string): Promise<Report | null> {
  const resp = await fetch(`/api/reports/${sessionId}`);
  if (resp.status === 404) return null;
  if (!resp.ok) throw new Error(`report fetch failed: ${resp.status}`);
  return (await resp.json()) as Report;
}

export async function postDecision(
  sessionId: string,
  payload: DecisionPayload,
): Promise<DecisionOutcome> {
  const resp = await fetch(`/api/sessions/${sessionId}/decision`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  return classifyDecisionResponse(resp.status, body);
}
