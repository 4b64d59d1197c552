// Wire shapes mirrored from the server's JSON contract.  The UI holds
// no pipeline logic of its own: what the server sends is the truth.

export interface SessionEvent {
  seq: number;
  ts: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface Verdict {
  kind: string;
  failing_step: string | null;
  reason: string;
  assumed_facts: string[];
}

export interface SessionSummary {
  session_id: string;
  problem_id: string;
  mode: string;
  state: string;
  cursor: number | null;
  created_at: number;
  updated_at: number;
  verdict: Verdict | null;
}

export interface Diagnostic {
  severity: string;
  line: number;
  column: number;
  message: string;
}

export interface DecisionContext {
  kind: string;
  target: { kind: string; key: string };
  statement: string;
  code: string | null;
  proof_code?: string | null;
  diagnostics: Diagnostic[];
  legal: string[];
  resume: { state: string; cursor: number | null };
  issues?: string[];
}

export interface DecisionPayload {
  type: string;
  code: string | null;
  expected_seq: number;
}

export interface Formalization {
  name: string;
  source_sid: string;
  code: string;
  status: string;
  diagnostics: Diagnostic[];
  proof_code: string | null;
}

export interface ReportItem {
  kind: string;
  key: string;
  name: string;
  statement: string;
  sid: string;
  skipped: boolean;
  attempts: number;
  transcripts: string[];
  formalization: Formalization | null;
}

export interface ReportStep {
  state: string;
  cursor: number | null;
  seq: number;
  ts: number;
  wall_clock: number;
}

export interface Report {
  schema_version: number;
  problem_id: string;
  mode: string;
  options: { introduce_variables: boolean };
  verdict: Verdict;
  steps: ReportStep[];
  facts: ReportItem[];
  lemmas: ReportItem[];
  goal: ReportItem | null;
  bridge: ReportItem | null;
  composed_proof: { code: string; status: string; final?: boolean } | null;
  derivation_order: number[];
  assumed_facts: string[];
  violations: { code: string; message: string }[];
  sweep: Record<string, string> | null;
}
