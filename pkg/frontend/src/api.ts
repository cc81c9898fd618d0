// Thin client over the documented HTTP contract. Every call maps to one
// endpoint; errors surface the service's {error: {type, message}} body.

import type {
  RatingLetter,
  ReferenceModel,
  ResultsDocument,
  RoleName,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public type: string,
    message: string,
  ) {
    super(message);
  }
}

export interface PlanParticipant {
  id?: string;
  display_name: string;
  role: RoleName;
}

export interface PlanInput {
  organization_name: string;
  scope_note?: string;
  schedule_note?: string;
  participants: PlanParticipant[];
  round_cap?: number;
}

export interface JoinResult {
  participant_id: string;
  display_name: string;
  role: RoleName;
  session_id: string;
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(
    method: string,
    path: string,
    options: { body?: unknown; participantId?: string } = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.body !== undefined) headers["content-type"] = "application/json";
    if (options.participantId) headers["x-participant-id"] = options.participantId;
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: options.body === undefined ? undefined : JSON.stringify(options.body),
    });
    const text = await response.text();
    if (!response.ok) {
      let type = "http";
      let message = text || response.statusText;
      try {
        const parsed = JSON.parse(text);
        type = parsed.error?.type ?? type;
        message = parsed.error?.message ?? message;
      } catch {
        // non-JSON error body; keep raw text
      }
      throw new ApiError(response.status, type, message);
    }
    return (text ? JSON.parse(text) : {}) as T;
  }

  createSession(plan: PlanInput): Promise<{ id: string; join_token: string }> {
    return this.request("POST", "/api/sessions", { body: plan });
  }

  join(sessionId: string, name: string, role: RoleName, token: string): Promise<JoinResult> {
    return this.request("POST", `/api/sessions/${sessionId}/join`, {
      body: { name, role, token },
    });
  }

  changePhase(
    sessionId: string,
    participantId: string,
    action: "begin_collection" | "finalize" | "close",
  ): Promise<{ phase: string }> {
    return this.request("POST", `/api/sessions/${sessionId}/phase`, {
      body: { action },
      participantId,
    });
  }

  getSession(sessionId: string, participantId: string): Promise<SessionView> {
    return this.request("GET", `/api/sessions/${sessionId}`, { participantId });
  }

  vote(sessionId: string, participantId: string, rating: RatingLetter): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/vote`, {
      body: { rating },
      participantId,
    });
  }

  justify(sessionId: string, participantId: string, text: string): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/justify`, {
      body: { text },
      participantId,
    });
  }

  resolveRound(
    sessionId: string,
    participantId: string,
  ): Promise<{ outcome: "consensus" | "new_round"; rating?: RatingLetter; round_number?: number }> {
    return this.request("POST", `/api/sessions/${sessionId}/round`, {
      body: { action: "resolve" },
      participantId,
    });
  }

  recordConsensus(
    sessionId: string,
    participantId: string,
    rating: RatingLetter,
    evidence: string[],
  ): Promise<SessionView> {
    return this.request("POST", `/api/sessions/${sessionId}/consensus`, {
      body: { rating, evidence },
      participantId,
    });
  }

  results(sessionId: string, participantId: string): Promise<ResultsDocument> {
    return this.request("GET", `/api/sessions/${sessionId}/results`, { participantId });
  }

  reportMarkdown(sessionId: string, participantId: string): Promise<string> {
    return this.fetchImpl(`${this.baseUrl}/api/sessions/${sessionId}/report?format=markdown`, {
      headers: { "x-participant-id": participantId },
    }).then(async (response) => {
      if (!response.ok) throw new ApiError(response.status, "http", await response.text());
      return response.text();
    });
  }

  model(): Promise<ReferenceModel> {
    return this.request("GET", "/api/model");
  }
}
