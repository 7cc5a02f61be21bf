/** Thin typed client for the curator HTTP API. */

import type {
  DecisionAction,
  PhaseReport,
  ProposalDto,
  SessionProgress,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    public baseUrl: string = "",
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  openSession(phase: number, cellIds: string[]): Promise<{ session_id: string }> {
    return this.post("/sessions", { phase, cell_ids: cellIds });
  }

  fetchProposals(
    sessionId: string,
    page = 1,
    status?: string,
  ): Promise<{ proposals: ProposalDto[]; total: number; page: number }> {
    const params = new URLSearchParams({ page: String(page) });
    if (status) params.set("status", status);
    return this.get(`/sessions/${sessionId}/proposals?${params}`);
  }

  getProgress(sessionId: string): Promise<SessionProgress> {
    return this.get(`/sessions/${sessionId}/progress`);
  }

  decide(
    proposalId: string,
    action: DecisionAction,
    reviewer: string,
    polygon?: number[][][],
  ): Promise<{ status: string }> {
    return this.post(`/proposals/${proposalId}/decision`, {
      action,
      reviewer,
      polygon: polygon ?? null,
    });
  }

  promotePhase(fromPhase: number): Promise<PhaseReport> {
    return this.post(`/phases/${fromPhase}/promote`, {});
  }

  getReport(phase: number): Promise<PhaseReport> {
    return this.get(`/phases/${phase}/report`);
  }
}
