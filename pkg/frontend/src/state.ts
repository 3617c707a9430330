/** View state and the pure input-event reducers that drive it. */

export interface Stats {
  bytesLoaded: number;
  records: number;
  decodeMs: number;
  /** wall-clock interval between displayed frames, for effective fps */
  displayIntervalMs: number;
}

export interface ViewState {
  yaw: number;
  pitch: number;
  fovH: number;
  fovV: number;
  playing: boolean;
  frame: number;
  foveate: boolean;
  gazeU: number;
  gazeV: number;
  stats: Stats | null;
  /** set when the service became unreachable; playback pauses */
  error: string | null;
}

export function initialState(): ViewState {
  return {
    yaw: 0,
    pitch: 0,
    fovH: 90,
    fovV: 90,
    playing: false,
    frame: 0,
    foveate: false,
    gazeU: 0.5,
    gazeV: 0.5,
    stats: null,
    error: null,
  };
}

export type InputEvent =
  | { kind: "drag"; dxPx: number; dyPx: number; viewWidthPx: number; viewHeightPx: number }
  | { kind: "key"; key: " " | "f" }
  | { kind: "gaze"; u: number; v: number };

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

/** Wrap yaw into (-180, 180]. */
function wrapYaw(yaw: number): number {
  let y = ((yaw + 180) % 360 + 360) % 360 - 180;
  if (y === -180) y = 180;
  return y;
}

/**
 * Apply one input event. Drag deltas map to angle deltas proportionally to
 * pixel motion and the current FOV: dragging right across the whole view
 * turns the camera right by one horizontal FOV, dragging down tilts it up.
 * Pitch clamps to ±90°.
 */
export function applyInput(state: ViewState, ev: InputEvent): ViewState {
  switch (ev.kind) {
    case "drag": {
      const yaw = wrapYaw(state.yaw + (ev.dxPx / ev.viewWidthPx) * state.fovH);
      const pitch = clamp(state.pitch + (ev.dyPx / ev.viewHeightPx) * state.fovV, -90, 90);
      return { ...state, yaw, pitch };
    }
    case "key":
      if (ev.key === " ") return { ...state, playing: !state.playing, error: null };
      return { ...state, foveate: !state.foveate };
    case "gaze":
      return { ...state, gazeU: clamp(ev.u, 0, 1), gazeV: clamp(ev.v, 0, 1) };
  }
}

/** Identifies a frame request; stale responses are discarded by tag. */
export interface PoseTag {
  frame: number;
  yaw: number;
  pitch: number;
  foveate: boolean;
  gazeU: number;
  gazeV: number;
}

export function poseTag(state: ViewState): PoseTag {
  return {
    frame: state.frame,
    yaw: state.yaw,
    pitch: state.pitch,
    foveate: state.foveate,
    gazeU: state.gazeU,
    gazeV: state.gazeV,
  };
}

export function sameTag(a: PoseTag, b: PoseTag): boolean {
  return (
    a.frame === b.frame &&
    a.yaw === b.yaw &&
    a.pitch === b.pitch &&
    a.foveate === b.foveate &&
    a.gazeU === b.gazeU &&
    a.gazeV === b.gazeV
  );
}
