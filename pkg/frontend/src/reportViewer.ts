// Report viewer: verdict banner, per-step accordion, composed proof
// with a copy action, and a loud warning for assumed facts.

import { buildReportView } from "./reportView.js";
import type { Report } from "./types.js";

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderReport(container: HTMLElement, report: Report): void {
  const view = buildReportView(report);
  container.innerHTML = "";

  const banner = el("div", `verdict-banner tone-${view.verdictTone}`, view.verdictKind);
  container.appendChild(banner);
  if (view.failingStep) {
    container.appendChild(el("p", "verdict-detail", `failed at ${view.failingStep}: ${view.reason}`));
  }
  if (view.showAssumedWarning) {
    container.appendChild(
      el(
        "div",
        "assumed-warning",
        `Contains ${view.assumedFacts.length} statement(s) accepted WITHOUT proof: ` +
          view.assumedFacts.join(", "),
      ),
    );
  }
  if (view.sweep) {
    container.appendChild(
      el("p", "sweep-note", `variable sweep: on=${view.sweep.on} off=${view.sweep.off}`),
    );
  }

  for (const section of view.sections) {
    const details = document.createElement("details");
    details.className = "report-section";
    const summary = document.createElement("summary");
    summary.textContent = `${section.title} (${section.items.length})`;
    details.appendChild(summary);
    for (const item of section.items) {
      const row = el("div", "report-item");
      row.appendChild(el("span", `status status-${item.status}`, item.status));
      row.appendChild(el("span", "item-name", item.name + (item.skipped ? " [skipped]" : "")));
      row.appendChild(el("pre", "statement-text", item.statement));
      if (item.code) row.appendChild(el("pre", "code-text", item.code));
      if (item.proof) row.appendChild(el("pre", "code-text", item.proof));
      for (const message of item.errors) {
        row.appendChild(el("pre", "diag diag-error", message));
      }
      details.appendChild(row);
    }
    container.appendChild(details);
  }

  if (view.composedProof) {
    const wrap = el("div", "composed-proof");
    wrap.appendChild(el("h3", "panel-title", "Composed proof (full compiling unit)"));
    const copy = el("button", "copy-button", "Copy") as HTMLButtonElement;
    copy.onclick = () => void navigator.clipboard.writeText(view.composedProof ?? "");
    wrap.appendChild(copy);
    wrap.appendChild(el("pre", "code-text", view.composedProof));
    container.appendChild(wrap);
  }
}
