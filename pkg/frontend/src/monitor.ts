// Live deployment monitor: polls the aggregate and session endpoints for a
// task and keeps an append-only series of readings for charting. Departures
// show up as a decremented count and a recomputed aggregate on the next poll.

import type { ApiClient } from "./api.js";
import type { AggregateFn, AggregateReading, SessionView } from "./types.js";

export interface MonitorSample {
  polledAt: number; // server event clock (updated_at of the reading)
  fn: AggregateFn;
  value: number | null;
  count: number;
}

export interface PoiOccupancy {
  questionId: number;
  inside: number;
  answered: number;
}

export class LiveMonitor {
  readonly series: MonitorSample[] = [];
  sessions: SessionView[] = [];
  fn: AggregateFn;
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastError: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly taskId: string,
    fn: AggregateFn = "avg",
  ) {
    this.fn = fn;
  }

  /** One poll cycle; appends a sample whenever the server state moved. */
  async poll(): Promise<MonitorSample | null> {
    let reading: AggregateReading;
    try {
      reading = await this.api.aggregate(this.taskId, this.fn);
      this.sessions = await this.api.taskSessions(this.taskId);
      this.lastError = null;
    } catch (err) {
      // a closed/vanished task freezes the view on the last good sample
      this.lastError = String(err);
      return null;
    }
    const sample: MonitorSample = {
      polledAt: reading.updated_at,
      fn: this.fn,
      value: reading.value,
      count: reading.count,
    };
    const last = this.series[this.series.length - 1];
    if (
      last &&
      last.polledAt === sample.polledAt &&
      last.value === sample.value &&
      last.count === sample.count
    ) {
      return null; // nothing changed since the previous poll
    }
    this.series.push(sample);
    return sample;
  }

  /** Switch the charted function; the series restarts to stay homogeneous. */
  setFunction(fn: AggregateFn): void {
    if (fn !== this.fn) {
      this.fn = fn;
      this.series.length = 0;
    }
  }

  /** Localized-participant count per POI from the session listing. */
  occupancy(): PoiOccupancy[] {
    const byQuestion = new Map<number, PoiOccupancy>();
    for (const s of this.sessions) {
      for (const [qid, status] of Object.entries(s.statuses)) {
        const id = Number(qid);
        let row = byQuestion.get(id);
        if (!row) {
          row = { questionId: id, inside: 0, answered: 0 };
          byQuestion.set(id, row);
        }
        if (status === "Inside") row.inside += 1;
        if (status === "Answered") row.answered += 1;
      }
    }
    return [...byQuestion.values()].sort((a, b) => a.questionId - b.questionId);
  }

  get frozen(): boolean {
    return this.lastError !== null;
  }

  start(intervalMs = 1500): void {
    this.stop();
    this.timer = setInterval(() => void this.poll(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
