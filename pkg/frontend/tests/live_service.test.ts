/** Integration checks against a live stream service.
 *
 * Skipped unless WAVEVID_SERVICE points at a running `wavevid serve`
 * instance, e.g.:
 *
 *   wavevid serve --input clip.wvv --port 8080 &
 *   WAVEVID_SERVICE=http://127.0.0.1:8080 npm test
 */
import { describe, expect, it } from "vitest";

import { ClientConfig, FrameClient, FrameResult } from "../src/client.js";
import { applyInput, initialState, poseTag } from "../src/state.js";

const HOST = process.env.WAVEVID_SERVICE ?? "";

describe.skipIf(!HOST)("live service", () => {
  const cfg: ClientConfig = {
    host: HOST,
    session: "",
    outWidth: 96,
    outHeight: 96,
    fovH: 90,
    fovV: 90,
  };

  function liveClient() {
    const frames: FrameResult[] = [];
    const errors: string[] = [];
    const client = new FrameClient(cfg, (url) => fetch(url), (r) => frames.push(r), (e) => errors.push(e));
    return { client, frames, errors };
  }

  const drained = async (client: FrameClient) => {
    while (client.busy) await new Promise((r) => setTimeout(r, 10));
  };

  it("scripted drag issues pose-tagged requests matching the script", async () => {
    const { client, frames, errors } = liveClient();
    let s = initialState();
    const yaws: string[] = [];
    for (const dxPx of [240, 240, -480]) {
      s = applyInput(s, { kind: "drag", dxPx, dyPx: 0, viewWidthPx: 960, viewHeightPx: 960 });
      client.request(poseTag(s));
      await drained(client);
      yaws.push(String(s.yaw));
    }
    expect(errors).toEqual([]);
    expect(frames).toHaveLength(3);
    const requested = client.requestLog.map((u) => new URL(u).searchParams.get("yaw"));
    expect(requested).toEqual(yaws);
    expect(yaws).toEqual(["22.5", "45", "0"]);
  });

  it("foveation toggle lowers X-Bytes-Loaded for the same pose", async () => {
    const { client, frames, errors } = liveClient();
    const s = { ...initialState(), yaw: 20, pitch: 5 };
    client.request(poseTag(s));
    await drained(client);
    client.request(poseTag(applyInput(s, { kind: "key", key: "f" })));
    await drained(client);
    expect(errors).toEqual([]);
    expect(frames).toHaveLength(2);
    expect(frames[1].stats.bytesLoaded).toBeLessThan(frames[0].stats.bytesLoaded);
    expect(frames[0].stats.bytesLoaded).toBeGreaterThan(0);
  });
});
