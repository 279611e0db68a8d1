// Thin fetch client for the scheduling service. Every number the UI shows
// comes from these payloads; the client never recomputes costs or workloads.

import type { AgendaPayload, BoardPayload, JobStatus, WorkspaceSummary } from "./types.js";

export class ApiError extends Error {
  status: number;
  body: unknown;

  constructor(status: number, body: unknown) {
    super(`API error ${status}`);
    this.status = status;
    this.body = body;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const text = await response.text();
  const body = text ? JSON.parse(text) : null;
  if (!response.ok) {
    throw new ApiError(response.status, body);
  }
  return body as T;
}

export class Client {
  constructor(readonly base: string) {}

  createWorkspace(instance: unknown): Promise<{ id: string }> {
    return request(this.base, "/workspaces", {
      method: "POST",
      body: JSON.stringify(instance),
    });
  }

  listWorkspaces(): Promise<WorkspaceSummary[]> {
    return request(this.base, "/workspaces");
  }

  workspace(id: string): Promise<WorkspaceSummary> {
    return request(this.base, `/workspaces/${id}`);
  }

  solveBoard(id: string, opts: { cutoff?: number; mode?: string; seed?: number } = {}): Promise<{ job: JobStatus }> {
    const params = new URLSearchParams();
    if (opts.cutoff !== undefined) params.set("cutoff", String(opts.cutoff));
    if (opts.mode) params.set("mode", opts.mode);
    if (opts.seed !== undefined) params.set("seed", String(opts.seed));
    return request(this.base, `/workspaces/${id}/board/solve?${params}`, { method: "POST" });
  }

  board(id: string): Promise<BoardPayload> {
    return request(this.base, `/workspaces/${id}/board`);
  }

  editBoard(id: string, edits: { patient: number; operator: number }[]): Promise<BoardPayload> {
    return request(this.base, `/workspaces/${id}/board`, {
      method: "PATCH",
      body: JSON.stringify(edits),
    });
  }

  solveAgenda(
    id: string,
    opts: { cutoff?: number; mode?: string; variant?: string; seed?: number } = {},
  ): Promise<{ job: JobStatus }> {
    const params = new URLSearchParams();
    if (opts.cutoff !== undefined) params.set("cutoff", String(opts.cutoff));
    if (opts.mode) params.set("mode", opts.mode);
    if (opts.variant) params.set("variant", opts.variant);
    if (opts.seed !== undefined) params.set("seed", String(opts.seed));
    return request(this.base, `/workspaces/${id}/agenda/solve?${params}`, { method: "POST" });
  }

  agenda(id: string): Promise<AgendaPayload> {
    return request(this.base, `/workspaces/${id}/agenda`);
  }

  job(id: string): Promise<JobStatus> {
    return request(this.base, `/workspaces/${id}/jobs/current`);
  }

  cancelJob(id: string): Promise<{ cancelling: boolean }> {
    return request(this.base, `/workspaces/${id}/jobs/current`, { method: "DELETE" });
  }
}

/** Poll the current job once a second until it settles. */
export async function waitForJob(
  client: Client,
  wsId: string,
  onTick?: (job: JobStatus) => void,
  intervalMs = 1000,
): Promise<JobStatus> {
  for (;;) {
    const job = await client.job(wsId);
    onTick?.(job);
    if (job.state === "done" || job.state === "cancelled") {
      return job;
    }
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}
