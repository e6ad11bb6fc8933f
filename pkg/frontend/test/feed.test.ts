import { describe, expect, it, vi } from "vitest";

import { EventFeed, renderFeed } from "../src/feed.js";
import type { EventSourceLike, FeedEvent } from "../src/feed.js";

class FakeEventSource implements EventSourceLike {
  onmessage: ((event: { data: string }) => void) | null = null;
  onerror: ((event: unknown) => void) | null = null;
  closed = false;

  constructor(readonly url: string) {}

  close(): void {
    this.closed = true;
  }

  emit(event: Partial<FeedEvent> & { seq: number }): void {
    this.onmessage?.({
      data: JSON.stringify({ kind: "decision", payload: { jobId: "J" }, at: "<TS>", ...event }),
    });
  }

  fail(): void {
    this.onerror?.(new Event("error"));
  }
}

describe("event feed", () => {
  it("delivers events in sequence order", () => {
    const sources: FakeEventSource[] = [];
    const seen: number[] = [];
    const feed = new EventFeed("", {
      eventSourceFactory: (url) => {
        const source = new FakeEventSource(url);
        sources.push(source);
        return source;
      },
      onEvent: (event) => seen.push(event.seq),
    });
    feed.start();
    sources[0].emit({ seq: 1 });
    sources[0].emit({ seq: 2 });
    sources[0].emit({ seq: 3 });
    expect(seen).toEqual([1, 2, 3]);
    feed.stop();
    expect(sources[0].closed).toBe(true);
  });

  it("reconnects after a drop, resumes from the last seq and never duplicates", async () => {
    vi.useFakeTimers();
    try {
      const sources: FakeEventSource[] = [];
      const seen: number[] = [];
      const statuses: string[] = [];
      const feed = new EventFeed("", {
        eventSourceFactory: (url) => {
          const source = new FakeEventSource(url);
          sources.push(source);
          return source;
        },
        onEvent: (event) => seen.push(event.seq),
        onStatus: (status) => statuses.push(status),
        reconnectDelayMs: 10,
      });
      feed.start();
      expect(sources[0].url).toBe("/events?since=0");
      sources[0].emit({ seq: 1 });
      sources[0].emit({ seq: 2 });

      sources[0].fail();
      expect(statuses.at(-1)).toContain("resync from seq 2");
      await vi.advanceTimersByTimeAsync(15);

      expect(sources).toHaveLength(2);
      expect(sources[1].url).toBe("/events?since=2");
      // server replays an already-seen event after reconnect; it is dropped
      sources[1].emit({ seq: 2 });
      sources[1].emit({ seq: 3 });
      expect(seen).toEqual([1, 2, 3]);
      feed.stop();
    } finally {
      vi.useRealTimers();
    }
  });

  it("rendering preserves order and escalates manager notices", () => {
    document.body.innerHTML = '<div id="feed"></div>';
    const container = document.getElementById("feed")!;
    const sources: FakeEventSource[] = [];
    let handler: ((event: FeedEvent) => void) | null = null;
    const feed = new EventFeed("", {
      eventSourceFactory: (url) => {
        const source = new FakeEventSource(url);
        sources.push(source);
        return source;
      },
      onEvent: (event) => handler?.(event),
    });
    handler = renderFeed(container, feed);
    feed.start();

    expect(container.querySelector(".feed-empty")?.textContent).toBe("no events yet");
    sources[0].emit({ seq: 1, kind: "decision" });
    sources[0].emit({ seq: 2, kind: "unknown_job_notice", payload: { jobId: "J-NEW" } });
    sources[0].emit({ seq: 3, kind: "broker_selection", payload: { offerId: "OFF-B", carbonRate: 600 } });

    const items = Array.from(container.querySelectorAll("li"));
    expect(items.map((item) => item.dataset.seq)).toEqual(["1", "2", "3"]);
    expect(items[1].classList.contains("escalated")).toBe(true);
    expect(items[2].textContent).toContain("OFF-B");
    expect(container.querySelector<HTMLElement>(".feed-empty")?.hidden).toBe(true);
    feed.stop();
  });
});
