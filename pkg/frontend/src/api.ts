/**
 * Thin fetch wrappers for the annotation service.
 *
 * Every helper takes an optional fetch implementation so tests can stub
 * the network. Errors are normalized to ApiError: HTTP failures carry the
 * server's "reason" string and status code, transport failures carry a
 * null status.
 */

import type { JudgmentResponse, StatusResponse, TasksResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

async function request<T>(fetchImpl: FetchLike, input: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = init === undefined ? await fetchImpl(input) : await fetchImpl(input, init);
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    throw new ApiError(`network error: ${detail}`, null);
  }
  if (!response.ok) {
    let reason = `request failed with status ${response.status}`;
    try {
      const body: unknown = await response.json();
      if (typeof body === "object" && body !== null) {
        const candidate = (body as Record<string, unknown>)["reason"];
        if (typeof candidate === "string" && candidate !== "") {
          reason = candidate;
        }
      }
    } catch {
      // non-JSON error body; keep the generic status message
    }
    throw new ApiError(reason, response.status);
  }
  return (await response.json()) as T;
}

export function fetchNextTask(
  annotator: string,
  fetchImpl: FetchLike = defaultFetch,
): Promise<TasksResponse> {
  return request<TasksResponse>(fetchImpl, `/tasks?annotator=${encodeURIComponent(annotator)}`);
}

export function submitJudgment(
  taskId: string,
  relevant: boolean,
  fetchImpl: FetchLike = defaultFetch,
): Promise<JudgmentResponse> {
  return request<JudgmentResponse>(fetchImpl, "/judgments", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ task_id: taskId, relevant }),
  });
}

export function fetchStatus(fetchImpl: FetchLike = defaultFetch): Promise<StatusResponse> {
  return request<StatusResponse>(fetchImpl, "/status");
}
