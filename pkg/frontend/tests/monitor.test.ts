import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { LiveMonitor } from "../src/monitor.js";
import type { AggregateReading, SessionView } from "../src/types.js";

function scriptedApi(
  readings: AggregateReading[],
  sessions: SessionView[] = [],
): ApiClient {
  let i = 0;
  return new ApiClient({
    baseUrl: "http://test",
    fetchImpl: async (url) => {
      if (url.includes("/aggregate")) {
        const reading = readings[Math.min(i, readings.length - 1)]!;
        i += 1;
        return jsonResponse(reading);
      }
      if (url.includes("/sessions")) {
        return jsonResponse(sessions);
      }
      return new Response("not found", { status: 404 });
    },
  });
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

const reading = (
  updated_at: number,
  value: number | null,
  count: number,
): AggregateReading => ({ fn: "avg", value, count, updated_at });

describe("live monitor", () => {
  it("appends a sample per state change and dedupes unchanged polls", async () => {
    const api = scriptedApi([
      reading(1, 3, 1),
      reading(1, 3, 1), // unchanged
      reading(2, 2.5, 2),
    ]);
    const m = new LiveMonitor(api, "t1");
    expect(await m.poll()).toMatchObject({ value: 3, count: 1 });
    expect(await m.poll()).toBeNull();
    expect(await m.poll()).toMatchObject({ value: 2.5, count: 2 });
    expect(m.series).toHaveLength(2);
  });

  it("shows a departure as a decrement and recomputed mean", async () => {
    const api = scriptedApi([
      reading(1, 2, 2),
      reading(2, 4, 1), // one participant rolled back
    ]);
    const m = new LiveMonitor(api, "t1");
    await m.poll();
    await m.poll();
    expect(m.series.map((s) => s.count)).toEqual([2, 1]);
    expect(m.series.map((s) => s.value)).toEqual([2, 4]);
  });

  it("renders an empty chart with no participants", async () => {
    const m = new LiveMonitor(scriptedApi([reading(0, null, 0)]), "t1");
    const sample = await m.poll();
    expect(sample).toMatchObject({ value: null, count: 0 });
  });

  it("freezes on server errors without losing the series", async () => {
    let calls = 0;
    const api = new ApiClient({
      baseUrl: "http://test",
      fetchImpl: async (url) => {
        calls += 1;
        if (calls <= 2 && url.includes("/aggregate")) {
          return jsonResponse(reading(1, 5, 1));
        }
        if (calls <= 2) return jsonResponse([]);
        return jsonResponse({ detail: "unknown task" }, 404);
      },
    });
    const m = new LiveMonitor(api, "t1");
    await m.poll();
    expect(m.frozen).toBe(false);
    await m.poll();
    expect(m.frozen).toBe(true);
    expect(m.series).toHaveLength(1); // last good sample retained
  });

  it("computes per-POI occupancy from session statuses", async () => {
    const sessions: SessionView[] = [
      {
        session_id: "s1",
        participant_id: "u1",
        statuses: { "1": "Inside", "2": "Unlocked" },
        credits: 0,
        completed: false,
      },
      {
        session_id: "s2",
        participant_id: "u2",
        statuses: { "1": "Answered", "2": "Inside" },
        credits: 2,
        completed: false,
      },
    ];
    const m = new LiveMonitor(scriptedApi([reading(1, 1, 1)], sessions), "t1");
    await m.poll();
    expect(m.occupancy()).toEqual([
      { questionId: 1, inside: 1, answered: 1 },
      { questionId: 2, inside: 1, answered: 0 },
    ]);
  });

  it("restarts the series when the charted function changes", async () => {
    const m = new LiveMonitor(scriptedApi([reading(1, 3, 1)]), "t1");
    await m.poll();
    m.setFunction("count");
    expect(m.fn).toBe("count");
    expect(m.series).toHaveLength(0);
  });
});
