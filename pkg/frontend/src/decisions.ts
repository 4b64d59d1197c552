// Decision panel view-model.  The action set is read verbatim from the
// server-supplied context: the UI must never invent a decision the
// server did not offer.

import type { DecisionContext, DecisionPayload, SessionEvent } from "./types.js";

const LABELS: Record<string, string> = {
  ContinueWithoutFact: "Continue without this fact",
  AcceptWithoutProof: "Accept as true without proof",
  MarkFalseAndStop: "Mark false and stop",
  RetryProver: "Retry the prover",
  ProvideTranslation: "Provide a corrected translation",
  ProvideFormalization: "Provide a corrected formalization",
  StopNegative: "Stop with a negative answer",
};

const NEEDS_CODE = new Set(["ProvideTranslation", "ProvideFormalization"]);

export interface DecisionAction {
  type: string;
  label: string;
  needsCode: boolean;
}

export function legalActionsFor(context: DecisionContext): DecisionAction[] {
  return (context.legal ?? []).map((type) => ({
    type,
    label: LABELS[type] ?? type,
    needsCode: NEEDS_CODE.has(type),
  }));
}

export function buildDecisionPayload(
  type: string,
  expectedSeq: number,
  code?: string,
): DecisionPayload {
  return { type, code: code ?? null, expected_seq: expectedSeq };
}

export type DecisionOutcome =
  | { kind: "applied"; event: SessionEvent }
  | { kind: "conflict-refresh"; message: string }
  | { kind: "illegal"; message: string }
  | { kind: "error"; message: string };

// 409 means our view of the session is stale: refresh and re-render,
// never silently retry the same decision.
export function classifyDecisionResponse(status: number, body: unknown): DecisionOutcome {
  const record = (body ?? {}) as Record<string, unknown>;
  if (status === 200) {
    return { kind: "applied", event: body as SessionEvent };
  }
  if (status === 409) {
    return { kind: "conflict-refresh", message: String(record.message ?? "stale session state") };
  }
  if (status === 422) {
    return { kind: "illegal", message: String(record.message ?? "decision not allowed here") };
  }
  return { kind: "error", message: String(record.message ?? `unexpected status ${status}`) };
}
