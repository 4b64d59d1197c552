// Session dashboard: list with state badges; opening a session renders
// its live timeline and, when the server asks, the decision panel.

import { getReport, getSession, listSessions } from "./api.js";
import { renderConflictBanner, renderDecisionPanel } from "./decisionPanel.js";
import { renderReport } from "./reportViewer.js";
import { SessionEventStream } from "./stream.js";
import { describeEvent, latestDecisionContext } from "./timeline.js";
import type { DecisionContext, SessionEvent, SessionSummary } from "./types.js";

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

let activeStream: SessionEventStream | null = null;

export async function renderDashboard(root: HTMLElement): Promise<void> {
  root.innerHTML = "";
  const list = el("div", "session-list");
  const detail = el("div", "session-detail");
  root.appendChild(list);
  root.appendChild(detail);

  const sessions = await listSessions();
  list.appendChild(el("h2", "panel-title", "Sessions"));
  if (!sessions.length) {
    list.appendChild(el("p", "empty-note", "No sessions yet. Create one through the API or CLI."));
  }
  for (const summary of sessions) {
    const row = el("div", "session-row");
    row.appendChild(el("span", `state-badge state-${summary.state}`, summary.state));
    row.appendChild(el("span", "session-id", summary.session_id));
    row.appendChild(el("span", "problem-id", summary.problem_id));
    if (summary.verdict) {
      row.appendChild(el("span", `verdict verdict-${summary.verdict.kind}`, summary.verdict.kind));
    }
    row.onclick = () => void openSession(detail, summary);
    list.appendChild(row);
  }
}

async function openSession(detail: HTMLElement, summary: SessionSummary): Promise<void> {
  activeStream?.close();
  detail.innerHTML = "";
  detail.appendChild(el("h2", "panel-title", `Session ${summary.session_id} (${summary.mode})`));
  const decisionHost = el("div", "decision-host");
  const timeline = el("ol", "timeline");
  const reportHost = el("div", "report-host");
  detail.appendChild(decisionHost);
  detail.appendChild(timeline);
  detail.appendChild(reportHost);

  const refresh = async (events: SessionEvent[]) => {
    timeline.innerHTML = "";
    for (const event of events) {
      const entry = describeEvent(event);
      const li = el("li", `timeline-entry kind-${entry.kind}`);
      li.appendChild(el("span", "entry-seq", String(entry.seq)));
      li.appendChild(el("span", "entry-label", entry.label));
      if (entry.detail) li.appendChild(el("span", "entry-detail", entry.detail));
      timeline.appendChild(li);
    }
    const pending = latestDecisionContext(events);
    if (pending) {
      renderDecisionPanel(
        decisionHost,
        summary.session_id,
        pending.context as unknown as DecisionContext,
        pending.seq,
        {
          onApplied: () => {
            decisionHost.innerHTML = "";
          },
          onConflict: async (message) => {
            const fresh = await getSession(summary.session_id);
            renderConflictBanner(decisionHost, message);
            void openSession(detail, fresh);
          },
        },
      );
    } else {
      decisionHost.innerHTML = "";
    }
    if (events.length && events[events.length - 1].kind === "VerdictReached") {
      const report = await getReport(summary.session_id);
      if (report) renderReport(reportHost, report);
    }
  };

  activeStream = new SessionEventStream(summary.session_id, (events) => void refresh(events));
  activeStream.connect();
}
