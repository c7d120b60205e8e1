/**
 * Session state machine for one annotator.
 *
 * All durable state lives on the server; this reducer only tracks what is
 * on screen: the current task, progress counts, and any error or warning
 * banner. A failed request stores the exact action to replay, so a verdict
 * the user already entered is never lost to a network hiccup.
 */

import type { JudgmentResponse, TasksResponse, TaskView } from "./types.js";

export type RetryAction =
  | { kind: "fetch-task" }
  | { kind: "submit"; taskId: string; relevant: boolean };

export type Phase = "loading" | "annotating" | "submitting" | "done";

export interface SessionState {
  annotator: string;
  phase: Phase;
  task: TaskView | null;
  done: number;
  total: number;
  // error + retry always travel together: set by a failed request,
  // cleared by retry or the next successful response
  error: string | null;
  retry: RetryAction | null;
  // non-fatal server warning, e.g. a replaced duplicate verdict
  notice: string | null;
}

export type SessionEvent =
  | { kind: "tasks"; response: TasksResponse }
  | { kind: "verdict"; relevant: boolean }
  | { kind: "submit-ok"; response: JudgmentResponse }
  | { kind: "request-failed"; action: RetryAction; message: string }
  | { kind: "retry" }
  | { kind: "dismiss-notice" };

export function initialState(annotator: string): SessionState {
  return {
    annotator,
    phase: "loading",
    task: null,
    done: 0,
    total: 0,
    error: null,
    retry: null,
    notice: null,
  };
}

export function reduce(state: SessionState, event: SessionEvent): SessionState {
  switch (event.kind) {
    case "tasks": {
      const { next, done, total } = event.response;
      if (next === null) {
        return { ...state, phase: "done", task: null, done, total, error: null, retry: null };
      }
      return { ...state, phase: "annotating", task: next, done, total, error: null, retry: null };
    }
    case "verdict": {
      // ignore keypresses while loading, submitting, or on the done screen
      if (state.phase !== "annotating" || state.task === null) {
        return state;
      }
      return { ...state, phase: "submitting" };
    }
    case "submit-ok": {
      const { done, total } = event.response;
      return {
        ...state,
        phase: "loading",
        task: null,
        done,
        total,
        error: null,
        retry: null,
        notice: event.response.warning ?? null,
      };
    }
    case "request-failed": {
      // keep the task on screen when there is one, so the failed verdict
      // stays visible next to the retry banner
      const phase: Phase =
        state.task !== null ? "annotating" : state.phase === "done" ? "done" : "loading";
      return { ...state, phase, error: event.message, retry: event.action };
    }
    case "retry": {
      if (state.retry === null) {
        return state;
      }
      const phase: Phase = state.retry.kind === "submit" ? "submitting" : "loading";
      return { ...state, phase, error: null, retry: null };
    }
    case "dismiss-notice": {
      return { ...state, notice: null };
    }
  }
}
