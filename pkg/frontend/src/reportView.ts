// Report view-model: flatten the report JSON into what the viewer
// renders (verdict banner, per-step sections, composed proof pane).

import type { Report, ReportItem } from "./types.js";

export interface ItemView {
  name: string;
  statement: string;
  status: string;
  code: string;
  proof: string;
  errors: string[];
  skipped: boolean;
}

export interface SectionView {
  title: string;
  items: ItemView[];
}

export interface ReportViewModel {
  problemId: string;
  mode: string;
  verdictKind: string;
  verdictTone: "positive" | "caution" | "negative";
  failingStep: string | null;
  reason: string;
  assumedFacts: string[];
  showAssumedWarning: boolean;
  steps: { label: string; wallClock: number }[];
  sections: SectionView[];
  composedProof: string | null;
  sweep: Record<string, string> | null;
}

const TONES: Record<string, "positive" | "caution" | "negative"> = {
  Verified: "positive",
  VerifiedTrivial: "caution",
  Refuted: "negative",
  Inconclusive: "caution",
};

function itemView(item: ReportItem): ItemView {
  const form = item.formalization;
  return {
    name: item.name,
    statement: item.statement,
    status: form?.status ?? "-",
    code: form?.code ?? "",
    proof: form?.proof_code ?? "",
    errors: (form?.diagnostics ?? [])
      .filter((d) => d.severity === "error")
      .map((d) => d.message),
    skipped: item.skipped,
  };
}

export function buildReportView(report: Report): ReportViewModel {
  const sections: SectionView[] = [];
  if (report.facts.length) {
    sections.push({ title: "Facts", items: report.facts.map(itemView) });
  }
  if (report.lemmas.length) {
    sections.push({ title: "Lemmas", items: report.lemmas.map(itemView) });
  }
  if (report.goal) {
    sections.push({ title: "Goal", items: [itemView(report.goal)] });
  }
  if (report.bridge) {
    sections.push({ title: "Final-gap bridge", items: [itemView(report.bridge)] });
  }
  const composed =
    report.composed_proof && report.composed_proof.final !== false
      ? report.composed_proof.code
      : null;
  return {
    problemId: report.problem_id,
    mode: report.mode,
    verdictKind: report.verdict.kind,
    verdictTone: TONES[report.verdict.kind] ?? "caution",
    failingStep: report.verdict.failing_step,
    reason: report.verdict.reason,
    assumedFacts: report.assumed_facts,
    showAssumedWarning: report.assumed_facts.length > 0,
    steps: report.steps.map((s) => ({
      label: s.cursor === null ? s.state : `${s.state}[${s.cursor}]`,
      wallClock: s.wall_clock,
    })),
    sections,
    composedProof: composed,
    sweep: report.sweep,
  };
}
