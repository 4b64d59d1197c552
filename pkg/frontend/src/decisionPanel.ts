// Decision panel: statement, formalization and diagnostics side by
// side, plus exactly the actions the server offered.  A 409 on submit
// refreshes the panel and shows a conflict banner; it never re-posts.

import { postDecision } from "./api.js";
import { buildDecisionPayload, legalActionsFor } from "./decisions.js";
import type { DecisionContext } from "./types.js";

export interface DecisionPanelHooks {
  onApplied: () => void;
  onConflict: (message: string) => void;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderDecisionPanel(
  container: HTMLElement,
  sessionId: string,
  context: DecisionContext,
  expectedSeq: number,
  hooks: DecisionPanelHooks,
): void {
  container.innerHTML = "";
  container.appendChild(el("h3", "panel-title", `Decision needed: ${context.kind}`));

  const columns = el("div", "decision-columns");
  const left = el("div", "decision-col");
  left.appendChild(el("h4", "col-title", "Statement"));
  left.appendChild(el("pre", "statement-text", context.statement));
  columns.appendChild(left);

  const middle = el("div", "decision-col");
  middle.appendChild(el("h4", "col-title", "Formalization"));
  middle.appendChild(el("pre", "code-text", context.code ?? "(none)"));
  if (context.proof_code) {
    middle.appendChild(el("h4", "col-title", "Last proof attempt"));
    middle.appendChild(el("pre", "code-text", context.proof_code));
  }
  columns.appendChild(middle);

  const right = el("div", "decision-col");
  right.appendChild(el("h4", "col-title", "Diagnostics"));
  const diagnostics = context.diagnostics ?? [];
  if (!diagnostics.length) {
    right.appendChild(el("p", "diag-empty", "(none)"));
  }
  for (const diag of diagnostics) {
    right.appendChild(el("pre", `diag diag-${diag.severity}`, `${diag.severity}: ${diag.message}`));
  }
  for (const issue of context.issues ?? []) {
    right.appendChild(el("pre", "diag diag-warning", issue));
  }
  columns.appendChild(right);
  container.appendChild(columns);

  const codePane = el("textarea", "code-editor") as HTMLTextAreaElement;
  codePane.placeholder = "replacement code";
  codePane.style.display = "none";
  codePane.value = context.code ?? "";

  const actions = el("div", "decision-actions");
  for (const action of legalActionsFor(context)) {
    const button = el("button", "decision-button", action.label) as HTMLButtonElement;
    button.dataset.decision = action.type;
    button.onclick = async () => {
      if (action.needsCode && codePane.style.display === "none") {
        codePane.style.display = "block";
        codePane.dataset.pendingType = action.type;
        codePane.focus();
        return;
      }
      const code = action.needsCode ? codePane.value : undefined;
      const outcome = await postDecision(
        sessionId,
        buildDecisionPayload(action.type, expectedSeq, code),
      );
      if (outcome.kind === "applied") {
        hooks.onApplied();
      } else if (outcome.kind === "conflict-refresh") {
        hooks.onConflict(outcome.message);
      } else {
        hooks.onConflict(outcome.message);
      }
    };
    actions.appendChild(button);
  }
  container.appendChild(actions);
  container.appendChild(codePane);
}

export function renderConflictBanner(container: HTMLElement, message: string): void {
  const banner = el("div", "conflict-banner", `Session changed under you: ${message} (refreshed)`);
  container.prepend(banner);
}
