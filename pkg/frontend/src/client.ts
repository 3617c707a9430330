/** HTTP client for the wavevid stream service with single-in-flight fetches. */

import { PoseTag, sameTag, Stats } from "./state.js";

export interface ServiceInfo {
  width: number;
  height: number;
  frame_count: number;
  fps: number;
  levels: number;
  inter_size: number;
}

export interface ClientConfig {
  host: string; // e.g. "http://localhost:8080"
  session: string; // "" = anonymous (no decoder reuse server-side)
  outWidth: number;
  outHeight: number;
  fovH: number;
  fovV: number;
}

export interface FrameResult {
  tag: PoseTag;
  blob: Blob;
  stats: Omit<Stats, "displayIntervalMs">;
}

/** Minimal fetch surface so tests can inject a scripted transport. */
export type FetchLike = (url: string) => Promise<Response>;

export function frameUrl(cfg: ClientConfig, tag: PoseTag): string {
  const q = new URLSearchParams({
    yaw: String(tag.yaw),
    pitch: String(tag.pitch),
    roll: "0",
    fov_h: String(cfg.fovH),
    fov_v: String(cfg.fovV),
    w: String(cfg.outWidth),
    h: String(cfg.outHeight),
    foveate: tag.foveate ? "1" : "0",
    gaze_u: String(tag.gazeU),
    gaze_v: String(tag.gazeV),
  });
  if (cfg.session) q.set("session", cfg.session);
  return `${cfg.host}/frame/${tag.frame}?${q.toString()}`;
}

export class FrameClient {
  private inflight: PoseTag | null = null;
  private pending: PoseTag | null = null;
  /** every issued request, for the scripted-replay checks */
  readonly requestLog: string[] = [];

  constructor(
    private readonly cfg: ClientConfig,
    private readonly fetchImpl: FetchLike,
    private readonly onFrame: (result: FrameResult) => void,
    private readonly onError: (message: string) => void,
  ) {}

  async info(): Promise<ServiceInfo> {
    const r = await this.fetchImpl(`${this.cfg.host}/info`);
    if (!r.ok) throw new Error(`info failed: ${r.status}`);
    return (await r.json()) as ServiceInfo;
  }

  /**
   * Request the frame for `tag`. At most one request is in flight; if one
   * is, `tag` replaces any queued pose (newest wins) and is issued when the
   * current request settles. Responses whose tag no longer matches the most
   * recently requested pose are discarded.
   */
  request(tag: PoseTag): void {
    if (this.inflight !== null) {
      this.pending = tag;
      return;
    }
    void this.issue(tag);
  }

  get busy(): boolean {
    return this.inflight !== null;
  }

  private async issue(tag: PoseTag): Promise<void> {
    this.inflight = tag;
    const url = frameUrl(this.cfg, tag);
    this.requestLog.push(url);
    try {
      const r = await this.fetchImpl(url);
      if (!r.ok) throw new Error(`frame request failed: ${r.status}`);
      const blob = await r.blob();
      const latest = this.pending ?? tag;
      if (sameTag(tag, latest)) {
        this.onFrame({
          tag,
          blob,
          stats: {
            bytesLoaded: Number(r.headers.get("X-Bytes-Loaded") ?? 0),
            records: Number(r.headers.get("X-Records") ?? 0),
            decodeMs: Number(r.headers.get("X-Decode-Ms") ?? 0),
          },
        });
      }
    } catch (err) {
      this.pending = null;
      this.onError(err instanceof Error ? err.message : String(err));
    } finally {
      this.inflight = null;
      const next = this.pending;
      this.pending = null;
      if (next !== null && !sameTag(tag, next)) void this.issue(next);
    }
  }
}
