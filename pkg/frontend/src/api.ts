/** Thin typed client for the sessionlens /v1 endpoints. */

import type { ContrastReport, ExpertTag, IntentCluster, SessionAnalysis } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${resp.status}`;
}

export class ApiClient {
  constructor(public baseUrl: string, public token: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return resp.json() as Promise<T>;
  }

  sessionAnalysis(sessionId: string): Promise<SessionAnalysis> {
    return this.get(`/v1/sessions/${encodeURIComponent(sessionId)}/analysis`);
  }

  clusters(): Promise<IntentCluster[]> {
    return this.get("/v1/clusters");
  }

  report(feature: string): Promise<ContrastReport> {
    return this.get(`/v1/reports/${encodeURIComponent(feature)}`);
  }

  async tags(key?: string): Promise<ExpertTag[]> {
    const query = key ? `?key=${encodeURIComponent(key)}` : "";
    const body = await this.get<{ tags: ExpertTag[] }>(`/v1/tags${query}`);
    return body.tags;
  }

  async postTag(tag: { author: string; key: string; verdict: string; note: string }):
      Promise<void> {
    const resp = await fetch(`${this.baseUrl}/v1/tags`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${this.token}`,
      },
      body: JSON.stringify(tag),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
  }
}
