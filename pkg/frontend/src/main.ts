/**
 * Entry point: wires the state machine to the DOM and the service.
 *
 * The annotator id comes from the ?annotator= query parameter so a reload
 * resumes the same session; without one, a small start form sets it.
 */

import { ApiError, fetchNextTask, fetchStatus, submitJudgment } from "./api.js";
import { fromKeyboardEvent, verdictFromEvent } from "./keyboard.js";
import { initialState, reduce } from "./state.js";
import type { RetryAction, SessionEvent, SessionState } from "./state.js";
import type { RelevanceRow } from "./types.js";

const STATUS_POLL_MS = 5000;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

let state: SessionState | null = null;

function apply(event: SessionEvent): void {
  if (state === null) {
    return;
  }
  state = reduce(state, event);
  render(state);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

async function loadNext(): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    const response = await fetchNextTask(state.annotator);
    apply({ kind: "tasks", response });
    if (state !== null && state.phase === "done") {
      void pollStatus();
    }
  } catch (err) {
    apply({ kind: "request-failed", action: { kind: "fetch-task" }, message: describe(err) });
  }
}

async function performSubmit(taskId: string, relevant: boolean): Promise<void> {
  try {
    const response = await submitJudgment(taskId, relevant);
    apply({ kind: "submit-ok", response });
    await loadNext();
  } catch (err) {
    apply({
      kind: "request-failed",
      action: { kind: "submit", taskId, relevant },
      message: describe(err),
    });
  }
}

function onVerdict(relevant: boolean): void {
  if (state === null || state.phase !== "annotating" || state.task === null) {
    return;
  }
  const taskId = state.task.task_id;
  apply({ kind: "verdict", relevant });
  void performSubmit(taskId, relevant);
}

function onRetry(): void {
  if (state === null || state.retry === null) {
    return;
  }
  const action: RetryAction = state.retry;
  apply({ kind: "retry" });
  if (action.kind === "submit") {
    void performSubmit(action.taskId, action.relevant);
  } else {
    void loadNext();
  }
}

async function pollStatus(): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    const status = await fetchStatus();
    byId("status-line").textContent =
      `server: ${status.done}/${status.total} judgments recorded`;
    if (state.phase === "done") {
      renderRelevanceRows(status.relevance);
    }
  } catch {
    // footer refresh only; request failures surface through the banner
  }
}

function renderRelevanceRows(rows: RelevanceRow[]): void {
  if (state === null) {
    return;
  }
  const annotator = state.annotator;
  const mine = rows.filter((r) => r.annotator === annotator && r.n_judged > 0);
  const body = byId("relevance-body");
  body.replaceChildren();
  for (const row of mine) {
    const tr = document.createElement("tr");
    const cells = [
      row.dataset,
      String(row.k),
      row.query_id,
      `${row.n_judged}/${row.k_total}`,
      row.running_score === null ? "-" : row.running_score.toFixed(2),
    ];
    for (const value of cells) {
      const td = document.createElement("td");
      td.textContent = value;
      tr.appendChild(td);
    }
    body.appendChild(tr);
  }
  byId("relevance-table").hidden = mine.length === 0;
}

function render(s: SessionState): void {
  const badge = byId("annotator-badge");
  badge.textContent = s.annotator;
  badge.hidden = false;
  const progress = byId("progress");
  progress.hidden = s.total === 0;
  progress.textContent = `${s.done}/${s.total}`;

  byId("start").hidden = true;
  byId("loading").hidden = s.phase !== "loading";

  const showTask = (s.phase === "annotating" || s.phase === "submitting") && s.task !== null;
  byId("task").hidden = !showTask;
  if (showTask && s.task !== null) {
    byId("task-desc").textContent = s.task.task_description;
    // assigned verbatim: the text is never reordered or truncated
    byId("query-text").textContent = s.task.query_text;
    byId("example-text").textContent = s.task.example_text;
    byId("task-meta").textContent = `dataset ${s.task.dataset}, k=${s.task.k}`;
    const disabled = s.phase === "submitting";
    byId<HTMLButtonElement>("relevant-btn").disabled = disabled;
    byId<HTMLButtonElement>("not-relevant-btn").disabled = disabled;
  }

  byId("done").hidden = s.phase !== "done";
  if (s.phase === "done") {
    byId("done-summary").textContent =
      `${s.done} of ${s.total} judgments recorded for ${s.annotator}.`;
  }

  byId("error-banner").hidden = s.error === null;
  if (s.error !== null) {
    byId("error-text").textContent = s.error;
  }
  byId("notice-banner").hidden = s.notice === null;
  if (s.notice !== null) {
    byId("notice-text").textContent = s.notice;
  }
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const annotator = (params.get("annotator") ?? "").trim();
  if (annotator === "") {
    byId("start").hidden = false;
    byId<HTMLFormElement>("start-form").addEventListener("submit", (event) => {
      event.preventDefault();
      const value = byId<HTMLInputElement>("annotator-input").value.trim();
      if (value === "") {
        return;
      }
      params.set("annotator", value);
      window.location.search = params.toString();
    });
    return;
  }

  state = initialState(annotator);
  render(state);

  window.addEventListener("keydown", (event) => {
    const verdict = verdictFromEvent(fromKeyboardEvent(event));
    if (verdict === null) {
      return;
    }
    event.preventDefault();
    onVerdict(verdict);
  });
  byId("relevant-btn").addEventListener("click", () => onVerdict(true));
  byId("not-relevant-btn").addEventListener("click", () => onVerdict(false));
  byId("retry-btn").addEventListener("click", onRetry);
  byId("dismiss-btn").addEventListener("click", () => apply({ kind: "dismiss-notice" }));

  void loadNext();
  void pollStatus();
  window.setInterval(() => void pollStatus(), STATUS_POLL_MS);
}

boot();
