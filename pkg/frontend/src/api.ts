// Thin typed client over the drill service's HTTP + JSON API. The UI
// consumes these endpoints verbatim and adds nothing of its own.

export interface OptionPayload {
  id: string;
  label: string;
}

export interface SessionStatePayload {
  session_id: string;
  scenario_id: string;
  participant_id: string;
  finished: boolean;
  elapsed_ms: number;
  node_id: string | null;
  prompt: string | null;
  options: OptionPayload[];
  timeout_remaining_ms: number | null;
  assessment?: string;
}

export interface ChoiceReply {
  color: "green" | "red";
  state: SessionStatePayload;
}

export interface OutcomePayload {
  behavior_tag: string;
  status: "performed" | "declined" | "timed_out" | "not_encountered";
  node_id: string | null;
  rationale: string;
}

export interface PlaybackPayload {
  node_id: string;
  option_id: string;
  label: string;
  recommended: boolean;
  rationale: string;
}

export interface AssessmentPayload {
  session_id: string;
  outcomes: OutcomePayload[];
  playback: PlaybackPayload[];
  score_summary: Record<string, number>;
}

export type QuestionnairePhase = "pre" | "post";
export type BatteryName = "self_efficacy" | "training_efficacy" | "engagement";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DrillApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const payload: unknown = await response.json();
    if (!response.ok) {
      const error = (payload as { error?: { code?: string; message?: string } }).error;
      throw new ApiError(
        response.status,
        error?.code ?? "unknown_error",
        error?.message ?? `request failed with status ${response.status}`,
      );
    }
    return payload as T;
  }

  createParticipant(group: "staff" | "visitor", id?: string): Promise<{ id: string }> {
    return this.request("POST", "/participants", id ? { group, id } : { group });
  }

  createSession(scenarioId: string, participantId: string): Promise<{ session_id: string; state: SessionStatePayload }> {
    return this.request("POST", "/sessions", {
      scenario_id: scenarioId,
      participant_id: participantId,
    });
  }

  getState(sessionId: string): Promise<SessionStatePayload> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/state`);
  }

  postChoice(sessionId: string, optionId: string): Promise<ChoiceReply> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/choice`, {
      option_id: optionId,
    });
  }

  getAssessment(sessionId: string): Promise<AssessmentPayload> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/assessment`);
  }

  submitQuestionnaire(
    participantId: string,
    phase: QuestionnairePhase,
    battery: BatteryName,
    values: number[],
  ): Promise<unknown> {
    return this.request(
      "POST",
      `/participants/${encodeURIComponent(participantId)}/questionnaire`,
      { phase, battery, values },
    );
  }
}
