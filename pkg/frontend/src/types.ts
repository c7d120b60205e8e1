/**
 * Response shapes of the annotation service endpoints.
 *
 * These mirror the server payloads field for field; the client never
 * reshapes or truncates what it receives.
 */

export interface Progress {
  done: number;
  total: number;
}

export interface TaskView {
  task_id: string;
  query_text: string;
  example_text: string;
  task_description: string;
  dataset: string;
  k: number;
  progress: Progress;
}

/** GET /tasks?annotator=... : next pending task, or next=null when done. */
export interface TasksResponse {
  annotator: string;
  next: TaskView | null;
  pending_ids: string[];
  done: number;
  total: number;
}

/** POST /judgments : acknowledgment; warning set on a replaced verdict. */
export interface JudgmentResponse {
  status: "ok";
  task_id: string;
  done: number;
  total: number;
  warning?: string;
}

export interface RelevanceRow {
  dataset: string;
  k: number;
  query_id: string;
  annotator: string;
  n_judged: number;
  k_total: number;
  running_score: number | null;
}

export interface CellStatus {
  dataset: string;
  k: number;
  n_records: number;
}

/** GET /status : totals plus running per-query relevance scores. */
export interface StatusResponse {
  total: number;
  done: number;
  pending: number;
  relevance: RelevanceRow[];
  cells: CellStatus[];
}
