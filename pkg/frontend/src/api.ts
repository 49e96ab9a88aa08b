/**
 * Typed client for the g4r HTTP API.
 *
 * Every call in here maps one-to-one onto a server endpoint; the interfaces
 * mirror the JSON bodies the server actually sends. Nothing participant-facing
 * ever receives system_prompt, prepend/append text, or api_key — the server
 * strips those before they reach the bootstrap payload, and this client only
 * models what comes over the wire.
 */

export const CAP_MESSAGE = "You have sent the maximum allowed messages";

export type AccessMode = "new_tab" | "embedded";

export interface WidgetBootstrap {
  interface_id: string;
  study_name: string;
  participant_label: string;
  gpt_label: string;
  first_message: string | null;
  max_messages: number;
  access_mode: AccessMode;
  top_html: string | null;
}

export interface Exchange {
  seq: number;
  participant_message: string;
  gpt_message: string;
  exchanged_at: string;
}

export interface SessionState {
  session_id: string;
  participant_id: string;
  remaining: number;
  history: Exchange[];
}

export interface SendResult {
  reply: string;
  remaining: number;
}

export interface Researcher {
  researcher_id: string;
  name: string;
  email: string;
  created_at: string;
}

export interface SignInResult {
  token: string;
  expires_at: string;
  researcher: Researcher;
}

export interface InterfaceSummary {
  interface_id: string;
  study_name: string;
  created_at: string;
  chat_url: string;
  snippet_url: string;
  csv_url: string;
}

export interface CreatedInterface {
  interface_id: string;
  chat_url: string;
  snippet_url: string;
  csv_url: string;
  config: Record<string, unknown>;
}

export interface SnippetPayload {
  interface_id: string;
  access_mode: AccessMode;
  embed_url: string;
  snippet: string;
}

export interface ServerDefaults {
  participant_label: string;
  gpt_label: string;
  first_message: string;
  temperature: string;
  max_messages: number;
  access_mode: AccessMode;
  bounds: {
    study_name_max_chars: number;
    label_max_chars: number;
    max_messages_ceiling: number;
    temperature_min: string;
    temperature_max: string;
  };
}

/** One entry of a 422 validation response. */
export interface FieldError {
  field: string;
  code: string;
  message: string;
}

/** Draft sent to the create endpoint; omitted fields take server defaults. */
export interface InterfaceDraft {
  study_name?: string;
  access_mode?: string;
  max_messages?: number;
  participant_label?: string;
  gpt_label?: string;
  system_prompt?: string;
  first_message?: string;
  temperature?: string;
  prepend_text?: string;
  append_text?: string;
  api_key?: string;
  top_html?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The server rejected a create form; `errors` lists one entry per bad field. */
export class ValidationError extends ApiError {
  constructor(public errors: FieldError[]) {
    super(422, errors.map((e) => e.message).join("; "));
    this.name = "ValidationError";
  }
}

/** The participant hit the message cap; `message` is the exact server text. */
export class CapError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "CapError";
  }
}

/** The chat backend could not be reached; the send consumed no quota. */
export class UpstreamError extends ApiError {
  constructor() {
    super(502, "the assistant could not be reached");
    this.name = "UpstreamError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    public token: string | null = null,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    return headers;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: this.headers(false),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (response.status === 422) {
      // Form validation answers with {"errors": [...]}; simpler endpoints
      // (account creation) answer with {"detail": "..."}.
      const payload = await response.json();
      if (Array.isArray(payload.errors)) {
        throw new ValidationError(payload.errors as FieldError[]);
      }
      throw new ApiError(422, typeof payload.detail === "string" ? payload.detail : "invalid input");
    }
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  defaults(): Promise<ServerDefaults> {
    return this.getJson("/api/defaults");
  }

  createAccount(name: string, email: string, password: string): Promise<Researcher> {
    return this.postJson("/api/accounts", { name, email, password });
  }

  async signIn(email: string, password: string): Promise<SignInResult> {
    const result = await this.postJson<SignInResult>("/api/signin", { email, password });
    this.token = result.token;
    return result;
  }

  async listInterfaces(): Promise<InterfaceSummary[]> {
    const payload = await this.getJson<{ interfaces: InterfaceSummary[] }>(
      "/api/researcher/interfaces",
    );
    return payload.interfaces;
  }

  createInterface(draft: InterfaceDraft): Promise<CreatedInterface> {
    return this.postJson("/api/interfaces", draft);
  }

  bootstrap(interfaceId: string): Promise<WidgetBootstrap> {
    return this.getJson(`/api/interfaces/${interfaceId}/bootstrap`);
  }

  snippet(interfaceId: string): Promise<SnippetPayload> {
    return this.getJson(`/api/interfaces/${interfaceId}/snippet`);
  }

  openSession(interfaceId: string, participantId: string): Promise<SessionState> {
    return this.postJson(`/api/interfaces/${interfaceId}/sessions`, {
      participant_id: participantId,
    });
  }

  /**
   * Send one participant message. Distinguishes the three failure modes the
   * widget has to treat differently: 409 carries the exact cap text as a
   * plain-text body, 502 means the upstream call failed and nothing was
   * recorded, everything else is a generic error.
   */
  async sendMessage(sessionId: string, text: string): Promise<SendResult> {
    const response = await fetch(`${this.baseUrl}/api/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ text }),
    });
    if (response.status === 409) {
      throw new CapError(await response.text());
    }
    if (response.status === 502) {
      throw new UpstreamError();
    }
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as SendResult;
  }

  /** Fetch a transcript CSV with the auth header attached; returns the bytes. */
  async downloadCsv(interfaceId: string): Promise<Blob> {
    const response = await fetch(`${this.baseUrl}/api/interfaces/${interfaceId}/messages.csv`, {
      headers: this.headers(false),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response.blob();
  }
}
