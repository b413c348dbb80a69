/**
 * Headless scripted run of a full session: 8 practice trials plus every main
 * trial, exercising the same state machine and API client the browser UI
 * uses.  Playback is simulated at a configurable speed factor so integration
 * tests do not take 16 real minutes.
 */

import { ApiClient, type ResponseEnvelope } from "./api.js";
import { FramePlayer, SynchronizedPlayer, type Clock, type DrawTarget } from "./playback.js";
import { SessionStateMachine } from "./state.js";

export interface WalkthroughOptions {
  /** wall-clock speedup of simulated playback (1 = real time) */
  speed?: number;
  fixationMs?: number;
}

export interface WalkthroughResult {
  practiceSubmitted: number;
  mainSubmitted: number;
  duplicates: number;
  playbackErrors: number[];
  maxPracticeDrift: number;
}

const nullTarget: DrawTarget = { drawFrame: () => undefined };

function fastClock(speed: number): Clock {
  let t = 0;
  return {
    now: () => t,
    schedule: (cb, delayMs) => {
      t += delayMs;
      setTimeout(cb, Math.max(0, delayMs / speed));
    },
  };
}

/** Deterministic scripted answers; the script never sees ground truth. */
function scriptedAnswer(trialIndex: number) {
  return {
    sawPeople: trialIndex % 2 === 0,
    sawCars: trialIndex % 3 === 0,
    confidence: (trialIndex % 5) + 1,
  };
}

export async function runWalkthrough(
  client: ApiClient,
  sessionId: string,
  options: WalkthroughOptions = {},
): Promise<WalkthroughResult> {
  const speed = options.speed ?? 1000;
  const session = await client.getSession(sessionId);
  const machine = new SessionStateMachine(
    session.n_trials,
    session.n_practice_trials,
  );
  const result: WalkthroughResult = {
    practiceSubmitted: 0,
    mainSubmitted: 0,
    duplicates: 0,
    playbackErrors: [],
    maxPracticeDrift: 0,
  };

  const submit = async (
    practice: boolean,
    trialIndex: number,
    response: { saw_people: boolean; saw_cars: boolean; confidence: number; response_time_ms: number },
  ) => {
    const envelope: ResponseEnvelope = {
      schema_version: session.schema_version,
      session_id: sessionId,
      trial_index: trialIndex,
      practice,
      response,
      client_timestamp: new Date().toISOString(),
    };
    const status = await client.postResponse(envelope);
    if (status === "duplicate") result.duplicates += 1;
  };

  machine.beginPractice();
  while (machine.phase === "practice") {
    const { index } = machine.currentTrial();
    const manifest = await client.getStimulus(sessionId, index, true);
    const player = new SynchronizedPlayer(
      nullTarget,
      nullTarget,
      manifest.n_frames,
      manifest.fps,
      fastClock(speed),
    );
    const report = await player.play();
    result.playbackErrors.push(report.durationError);
    result.maxPracticeDrift = Math.max(result.maxPracticeDrift, player.maxDrift);
    const answer = scriptedAnswer(index);
    machine.setSawPeople(answer.sawPeople);
    machine.setSawCars(answer.sawCars);
    machine.setConfidence(answer.confidence);
    await submit(true, index, {
      saw_people: answer.sawPeople,
      saw_cars: answer.sawCars,
      confidence: answer.confidence,
      response_time_ms: 400 + index,
    });
    machine.finishPracticeTrial();
    result.practiceSubmitted += 1;
  }

  while (machine.phase !== "done") {
    const { index } = machine.currentTrial();
    machine.startPlayback();
    const manifest = await client.getStimulus(sessionId, index, false);
    const player = new FramePlayer(
      nullTarget,
      manifest.n_frames,
      manifest.fps,
      fastClock(speed),
    );
    const report = await player.play();
    result.playbackErrors.push(report.durationError);
    machine.showResponseScreen();
    const answer = scriptedAnswer(index);
    machine.setSawPeople(answer.sawPeople);
    machine.setSawCars(answer.sawCars);
    machine.setConfidence(answer.confidence);
    const response = machine.submitResponse(500 + index);
    await submit(false, index, response);
    result.mainSubmitted += 1;
  }

  return result;
}
