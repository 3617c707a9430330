/** Playback clock: advances the frame at the file's fps, dropping frames
 * rather than queueing when the service is slow. */

import { FrameClient } from "./client.js";
import { poseTag, ViewState } from "./state.js";

export class Player {
  private lastTickMs: number | null = null;

  constructor(
    private readonly client: FrameClient,
    private readonly fps: number,
    private readonly frameCount: number,
  ) {}

  /**
   * Advance on a clock tick at `nowMs`. While playing, steps the frame by
   * however many periods elapsed (skipped periods are dropped, not queued)
   * and requests the new frame unless a request is already in flight.
   * Returns the updated state.
   */
  tick(state: ViewState, nowMs: number): ViewState {
    if (!state.playing) {
      this.lastTickMs = nowMs;
      return state;
    }
    const period = 1000 / this.fps;
    if (this.lastTickMs === null) this.lastTickMs = nowMs;
    const elapsed = nowMs - this.lastTickMs;
    if (elapsed < period) return state;
    const steps = Math.floor(elapsed / period);
    this.lastTickMs += steps * period;
    const frame = (state.frame + steps) % this.frameCount;
    const next = { ...state, frame };
    if (!this.client.busy) this.client.request(poseTag(next));
    return next;
  }

  /** Re-request the current frame after a pose/gaze/foveation change. */
  refresh(state: ViewState): void {
    this.client.request(poseTag(state));
  }
}
