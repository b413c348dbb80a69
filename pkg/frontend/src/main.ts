/**
 * Browser entry point: wires the state machine, API client, and canvas
 * playback to a minimal DOM.  Keyboard shortcuts: Y/N answer the question
 * under focus, digits 1-5 set confidence, Enter submits.
 */

import { ApiClient } from "./api.js";
import { FramePlayer, SynchronizedPlayer, type DrawTarget } from "./playback.js";
import { IncompleteResponse, SessionStateMachine } from "./state.js";

const FIXATION_MS = 500;

function canvasTarget(canvas: HTMLCanvasElement, images: HTMLImageElement[]): DrawTarget {
  const ctx = canvas.getContext("2d");
  return {
    drawFrame(index: number) {
      const img = images[index];
      if (ctx && img) ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
    },
  };
}

async function loadImages(urls: string[]): Promise<HTMLImageElement[]> {
  return Promise.all(
    urls.map(
      (url) =>
        new Promise<HTMLImageElement>((resolve, reject) => {
          const img = new Image();
          img.onload = () => resolve(img);
          img.onerror = () => reject(new Error(`failed to preload ${url}`));
          img.src = url;
        }),
    ),
  );
}

export async function startSession(root: HTMLElement, baseUrl: string, sessionId: string) {
  const client = new ApiClient(baseUrl);
  const session = await client.getSession(sessionId);
  const machine = new SessionStateMachine(session.n_trials, session.n_practice_trials);

  root.innerHTML = `
    <div id="instructions">
      <p>You will watch short clips of simulated prosthetic vision.
         After each clip, report whether you saw any people and whether you
         saw any cars, then rate your confidence from 1 (guessing) to 5
         (certain).</p>
      <button id="begin">Begin practice</button>
    </div>
    <div id="stage" hidden>
      <canvas id="spv" width="512" height="512"></canvas>
      <canvas id="original" width="512" height="512" hidden></canvas>
    </div>
    <form id="answers" hidden>
      <fieldset><legend>Did you see any people?</legend>
        <label><input type="radio" name="people" value="yes">Yes</label>
        <label><input type="radio" name="people" value="no">No</label>
      </fieldset>
      <fieldset><legend>Did you see any cars?</legend>
        <label><input type="radio" name="cars" value="yes">Yes</label>
        <label><input type="radio" name="cars" value="no">No</label>
      </fieldset>
      <fieldset><legend>Confidence</legend>
        ${[1, 2, 3, 4, 5]
          .map(
            (v) =>
              `<label><input type="radio" name="confidence" value="${v}">${v}</label>`,
          )
          .join("")}
      </fieldset>
      <p id="validation" role="alert"></p>
      <button type="submit">Submit</button>
    </form>`;

  const stage = root.querySelector<HTMLElement>("#stage")!;
  const spv = root.querySelector<HTMLCanvasElement>("#spv")!;
  const original = root.querySelector<HTMLCanvasElement>("#original")!;
  const form = root.querySelector<HTMLFormElement>("#answers")!;
  const validation = root.querySelector<HTMLElement>("#validation")!;

  const readForm = () => {
    const get = (name: string) =>
      form.querySelector<HTMLInputElement>(`input[name=${name}]:checked`)?.value;
    const people = get("people");
    const cars = get("cars");
    const confidence = get("confidence");
    if (people !== undefined) machine.setSawPeople(people === "yes");
    if (cars !== undefined) machine.setSawCars(cars === "yes");
    if (confidence !== undefined) machine.setConfidence(Number(confidence));
  };

  const playTrial = async (practice: boolean, index: number) => {
    const manifest = await client.getStimulus(sessionId, index, practice);
    const frames = await loadImages(manifest.frame_urls.map((u) => baseUrl + u));
    stage.hidden = false;
    form.hidden = true;
    await new Promise((r) => setTimeout(r, FIXATION_MS));
    if (practice && manifest.original_frame_urls) {
      const originals = await loadImages(
        manifest.original_frame_urls.map((u) => baseUrl + u),
      );
      original.hidden = false;
      await new SynchronizedPlayer(
        canvasTarget(original, originals),
        canvasTarget(spv, frames),
        manifest.n_frames,
        manifest.fps,
      ).play();
    } else {
      original.hidden = true;
      await new FramePlayer(canvasTarget(spv, frames), manifest.n_frames, manifest.fps).play();
    }
    form.hidden = false;
    form.reset();
    return Date.now();
  };

  let shownAt = 0;

  const advance = async () => {
    if (machine.phase === "done") {
      root.innerHTML = "<p>Session complete. Thank you!</p>";
      return;
    }
    const { practice, index } = machine.currentTrial();
    if (!practice) machine.startPlayback();
    shownAt = await playTrial(practice, index);
    if (!practice) machine.showResponseScreen();
  };

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    readForm();
    const { practice, index } = machine.currentTrial();
    try {
      if (practice) {
        if (!machine.canSubmit) throw new IncompleteResponse("answer all questions");
        await client.postResponse({
          schema_version: session.schema_version,
          session_id: sessionId,
          trial_index: index,
          practice: true,
          response: {
            saw_people: machine.pending.sawPeople!,
            saw_cars: machine.pending.sawCars!,
            confidence: machine.pending.confidence!,
            response_time_ms: Date.now() - shownAt,
          },
          client_timestamp: new Date().toISOString(),
        });
        machine.finishPracticeTrial();
      } else {
        const response = machine.submitResponse(Date.now() - shownAt);
        await client.postResponse({
          schema_version: session.schema_version,
          session_id: sessionId,
          trial_index: index,
          practice: false,
          response,
          client_timestamp: new Date().toISOString(),
        });
      }
      validation.textContent = "";
      await advance();
    } catch (err) {
      if (err instanceof IncompleteResponse) {
        validation.textContent = `Please ${err.message}.`;
      } else {
        throw err;
      }
    }
  });

  root.querySelector<HTMLButtonElement>("#begin")!.addEventListener("click", async () => {
    root.querySelector<HTMLElement>("#instructions")!.hidden = true;
    machine.beginPractice();
    await advance();
  });
}
