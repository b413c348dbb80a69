/**
 * Frame-sequence playback at a fixed fps, decoupled from the DOM so it can be
 * driven by fake clocks in tests.  Practice trials run two players in
 * lockstep (original footage beside its prosthetic-vision rendering).
 */

export interface DrawTarget {
  drawFrame(index: number): void;
}

export interface Clock {
  now(): number;
  schedule(cb: () => void, delayMs: number): void;
}

export const realClock: Clock = {
  now: () => Date.now(),
  schedule: (cb, delayMs) => setTimeout(cb, delayMs),
};

export interface PlaybackReport {
  framesDrawn: number;
  durationMs: number;
  /** |actual - nominal| / nominal; a drop-free run stays within 0.1 */
  durationError: number;
}

export class FramePlayer {
  constructor(
    private readonly target: DrawTarget,
    private readonly nFrames: number,
    private readonly fps: number,
    private readonly clock: Clock = realClock,
  ) {
    if (nFrames < 1 || fps <= 0) throw new Error("bad playback parameters");
  }

  play(): Promise<PlaybackReport> {
    const interval = 1000 / this.fps;
    const nominal = this.nFrames * interval;
    const start = this.clock.now();
    return new Promise((resolve) => {
      let index = 0;
      const tick = () => {
        this.target.drawFrame(index);
        index += 1;
        if (index >= this.nFrames) {
          // hold the final frame for one interval before finishing
          this.clock.schedule(() => {
            const durationMs = this.clock.now() - start;
            resolve({
              framesDrawn: index,
              durationMs,
              durationError: Math.abs(durationMs - nominal) / nominal,
            });
          }, interval);
          return;
        }
        this.clock.schedule(tick, interval);
      };
      tick();
    });
  }
}

/** Two canvases advancing together; frame indices must match on every tick. */
export class SynchronizedPlayer {
  readonly drift: number[] = [];

  constructor(
    private readonly left: DrawTarget,
    private readonly right: DrawTarget,
    private readonly nFrames: number,
    private readonly fps: number,
    private readonly clock: Clock = realClock,
  ) {}

  play(): Promise<PlaybackReport> {
    let leftIndex = -1;
    let rightIndex = -1;
    const probe: DrawTarget = {
      drawFrame: (i) => {
        this.left.drawFrame(i);
        leftIndex = i;
        this.right.drawFrame(i);
        rightIndex = i;
        this.drift.push(Math.abs(leftIndex - rightIndex));
      },
    };
    return new FramePlayer(probe, this.nFrames, this.fps, this.clock).play();
  }

  get maxDrift(): number {
    return this.drift.length ? Math.max(...this.drift) : 0;
  }
}

/** Fetch and decode every frame before playback starts. */
export async function preloadFrames(
  urls: string[],
  load: (url: string) => Promise<unknown>,
): Promise<unknown[]> {
  return Promise.all(urls.map((u) => load(u)));
}
