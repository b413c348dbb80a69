/**
 * Session state machine.
 *
 * Phases advance Instructions -> Practice (one per practice trial) ->
 * (Fixation -> Playback -> Response) x n_trials -> Done.  A response can only
 * be submitted from the Response phase, only once per trial, and only when
 * both detection answers and a confidence level have been chosen.
 */

import type { TrialResponse } from "./api.js";

export type Phase =
  | "instructions"
  | "practice"
  | "fixation"
  | "playback"
  | "response"
  | "done";

export interface PendingResponse {
  sawPeople: boolean | null;
  sawCars: boolean | null;
  confidence: number | null;
}

const emptyPending = (): PendingResponse => ({
  sawPeople: null,
  sawCars: null,
  confidence: null,
});

export class InvalidTransition extends Error {}
export class IncompleteResponse extends Error {}

export class SessionStateMachine {
  phase: Phase = "instructions";
  practiceIndex = 0;
  trialIndex = 0;
  pending: PendingResponse = emptyPending();
  private submitted = new Set<string>();

  constructor(
    readonly nTrials: number,
    readonly nPracticeTrials: number,
  ) {
    if (nTrials < 1) throw new Error("session needs at least one trial");
  }

  /** The trial currently on screen, as (practice flag, index). */
  currentTrial(): { practice: boolean; index: number } {
    if (this.phase === "practice") {
      return { practice: true, index: this.practiceIndex };
    }
    return { practice: false, index: this.trialIndex };
  }

  beginPractice(): void {
    if (this.phase !== "instructions") {
      throw new InvalidTransition(`cannot start practice from ${this.phase}`);
    }
    this.phase = this.nPracticeTrials > 0 ? "practice" : "fixation";
  }

  /** Record the practice response and advance (practice is still validated). */
  finishPracticeTrial(): void {
    if (this.phase !== "practice") {
      throw new InvalidTransition(`not in practice (${this.phase})`);
    }
    this.requireComplete();
    this.markSubmitted(true, this.practiceIndex);
    this.pending = emptyPending();
    this.practiceIndex += 1;
    if (this.practiceIndex >= this.nPracticeTrials) this.phase = "fixation";
  }

  startPlayback(): void {
    if (this.phase !== "fixation") {
      throw new InvalidTransition(`cannot play from ${this.phase}`);
    }
    this.phase = "playback";
  }

  showResponseScreen(): void {
    if (this.phase !== "playback") {
      throw new InvalidTransition(`cannot answer from ${this.phase}`);
    }
    this.phase = "response";
  }

  setSawPeople(v: boolean): void {
    this.requireAnswerPhase();
    this.pending.sawPeople = v;
  }

  setSawCars(v: boolean): void {
    this.requireAnswerPhase();
    this.pending.sawCars = v;
  }

  setConfidence(v: number): void {
    this.requireAnswerPhase();
    if (!Number.isInteger(v) || v < 1 || v > 5) {
      throw new RangeError(`confidence must be an integer 1..5, got ${v}`);
    }
    this.pending.confidence = v;
  }

  get canSubmit(): boolean {
    return (
      this.pending.sawPeople !== null &&
      this.pending.sawCars !== null &&
      this.pending.confidence !== null
    );
  }

  /**
   * Validate and consume the pending response for the current main trial.
   * Throws IncompleteResponse when an answer is missing, and
   * InvalidTransition on double submission.
   */
  submitResponse(responseTimeMs: number): TrialResponse {
    if (this.phase !== "response") {
      throw new InvalidTransition(`cannot submit from ${this.phase}`);
    }
    this.requireComplete();
    this.markSubmitted(false, this.trialIndex);
    const out: TrialResponse = {
      saw_people: this.pending.sawPeople as boolean,
      saw_cars: this.pending.sawCars as boolean,
      confidence: this.pending.confidence as number,
      response_time_ms: responseTimeMs,
    };
    this.pending = emptyPending();
    this.trialIndex += 1;
    this.phase = this.trialIndex >= this.nTrials ? "done" : "fixation";
    return out;
  }

  /** Resume after a reload: skip trials the server has already acknowledged. */
  resumeAt(firstUnanswered: number): void {
    if (firstUnanswered < 0 || firstUnanswered > this.nTrials) {
      throw new RangeError(`bad resume index ${firstUnanswered}`);
    }
    this.trialIndex = firstUnanswered;
    this.phase = firstUnanswered >= this.nTrials ? "done" : "fixation";
  }

  private requireAnswerPhase(): void {
    if (this.phase !== "response" && this.phase !== "practice") {
      throw new InvalidTransition(`cannot edit answers from ${this.phase}`);
    }
  }

  private requireComplete(): void {
    if (!this.canSubmit) {
      const missing = [
        this.pending.sawPeople === null ? "people answer" : null,
        this.pending.sawCars === null ? "cars answer" : null,
        this.pending.confidence === null ? "confidence" : null,
      ].filter(Boolean);
      throw new IncompleteResponse(`missing ${missing.join(", ")}`);
    }
  }

  private markSubmitted(practice: boolean, index: number): void {
    const key = `${practice}:${index}`;
    if (this.submitted.has(key)) {
      throw new InvalidTransition(`trial ${key} already submitted`);
    }
    this.submitted.add(key);
  }
}
