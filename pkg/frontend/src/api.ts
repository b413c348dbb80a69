/**
 * Typed client for the trial server.
 *
 * All payloads are scanned for ground-truth leakage before they are handed to
 * the rest of the UI: the experiment is double-blind on the client side, so a
 * server regression that exposes clip identities or labels must fail loudly.
 */

export interface SessionInfo {
  schema_version: number;
  session_id: string;
  n_trials: number;
  n_practice_trials: number;
}

export interface StimulusManifest {
  schema_version: number;
  fps: number;
  n_frames: number;
  practice: boolean;
  frame_urls: string[];
  original_frame_urls?: string[];
}

export interface TrialResponse {
  saw_people: boolean;
  saw_cars: boolean;
  confidence: number; // 1..5
  response_time_ms: number;
}

export interface ResponseEnvelope {
  schema_version: number;
  session_id: string;
  trial_index: number;
  practice: boolean;
  response: TrialResponse;
  client_timestamp: string;
}

/** Field names that would unblind the participant if they ever appeared. */
const FORBIDDEN_KEYS = [
  "clip_id",
  "category",
  "has_people",
  "has_cars",
  "ground_truth",
];

export class BlindingViolation extends Error {}

export function assertBlinded(payload: unknown, context: string): void {
  const seen = new Set<unknown>();
  const walk = (value: unknown): void => {
    if (value === null || typeof value !== "object" || seen.has(value)) return;
    seen.add(value);
    if (Array.isArray(value)) {
      value.forEach(walk);
      return;
    }
    for (const [key, child] of Object.entries(value)) {
      if (FORBIDDEN_KEYS.includes(key)) {
        throw new BlindingViolation(
          `server payload for ${context} contains forbidden field "${key}"`,
        );
      }
      walk(child);
    }
  };
  walk(payload);
}

export interface RetryPolicy {
  attempts: number;
  baseDelayMs: number;
}

const DEFAULT_RETRY: RetryPolicy = { attempts: 5, baseDelayMs: 200 };

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
    private readonly retry: RetryPolicy = DEFAULT_RETRY,
  ) {}

  private async getJson(path: string): Promise<unknown> {
    let lastError: unknown;
    for (let attempt = 0; attempt < this.retry.attempts; attempt++) {
      try {
        const res = await this.fetchImpl(this.baseUrl + path);
        if (res.status === 200) return await res.json();
        if (res.status >= 400 && res.status < 500) {
          throw new Error(`GET ${path} failed with ${res.status}`);
        }
        lastError = new Error(`GET ${path} failed with ${res.status}`);
      } catch (err) {
        if (!(err instanceof TypeError) && `${err}`.includes("failed with 4")) {
          throw err;
        }
        lastError = err;
      }
      await sleep(this.retry.baseDelayMs * 2 ** attempt);
    }
    throw lastError;
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    const payload = await this.getJson(`/api/session/${sessionId}`);
    assertBlinded(payload, "session");
    return payload as SessionInfo;
  }

  async getStimulus(
    sessionId: string,
    trialIndex: number,
    practice: boolean,
  ): Promise<StimulusManifest> {
    const flag = practice ? "?practice=true" : "";
    const payload = await this.getJson(
      `/api/stimulus/${sessionId}/${trialIndex}${flag}`,
    );
    assertBlinded(payload, `stimulus ${trialIndex}`);
    return payload as StimulusManifest;
  }

  /**
   * Submit a trial response, retrying with exponential backoff until the
   * server acknowledges. A 409 means an earlier attempt (or an earlier page
   * load) already landed, which is success for the caller.
   */
  async postResponse(envelope: ResponseEnvelope): Promise<"accepted" | "duplicate"> {
    let lastError: unknown;
    for (let attempt = 0; attempt < this.retry.attempts; attempt++) {
      try {
        const res = await this.fetchImpl(`${this.baseUrl}/api/response`, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify(envelope),
        });
        if (res.status === 200) return "accepted";
        if (res.status === 409) return "duplicate";
        if (res.status === 422 || res.status === 404) {
          throw new Error(`response rejected with ${res.status}`);
        }
        lastError = new Error(`POST /api/response failed with ${res.status}`);
      } catch (err) {
        if (`${err}`.includes("rejected with")) throw err;
        lastError = err;
      }
      await sleep(this.retry.baseDelayMs * 2 ** attempt);
    }
    throw lastError;
  }
}
