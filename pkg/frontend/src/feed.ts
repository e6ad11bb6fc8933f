// Live event feed over server-sent events. Rendering preserves sequence
// order; a dropped stream reconnects with ?since=<last seq> and surfaces a
// "resyncing" indicator instead of silently duplicating or reordering.

export interface FeedEvent {
  seq: number;
  kind: "decision" | "unknown_job_notice" | "manager_notice" | "broker_selection";
  payload: Record<string, unknown>;
  at: string;
}

export interface EventSourceLike {
  onmessage: ((event: { data: string }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface FeedOptions {
  onEvent?: (event: FeedEvent) => void;
  onStatus?: (status: string) => void;
  reconnectDelayMs?: number;
  eventSourceFactory?: EventSourceFactory;
}

export class EventFeed {
  private source: EventSourceLike | null = null;
  private lastSeq = 0;
  private stopped = false;
  private readonly events: FeedEvent[] = [];
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly options: FeedOptions = {},
  ) {}

  get seen(): readonly FeedEvent[] {
    return this.events;
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.source?.close();
    this.source = null;
  }

  private connect(): void {
    const factory = this.options.eventSourceFactory
      ?? ((url: string) => new EventSource(url) as unknown as EventSourceLike);
    const source = factory(`${this.baseUrl}/events?since=${this.lastSeq}`);
    this.source = source;
    this.options.onStatus?.(this.lastSeq === 0 ? "connected" : `resyncing from seq ${this.lastSeq}`);

    source.onmessage = (message) => {
      let event: FeedEvent;
      try {
        event = JSON.parse(message.data) as FeedEvent;
      } catch {
        return;
      }
      if (event.seq <= this.lastSeq) {
        return; // replayed duplicate after a resync
      }
      this.lastSeq = event.seq;
      this.events.push(event);
      this.options.onEvent?.(event);
    };
    source.onerror = () => {
      if (this.stopped) {
        return;
      }
      source.close();
      this.options.onStatus?.(`stream dropped; resync from seq ${this.lastSeq}`);
      this.timer = setTimeout(() => this.connect(), this.options.reconnectDelayMs ?? 1000);
    };
  }
}

export function renderFeed(container: HTMLElement, feed: EventFeed): (event: FeedEvent) => void {
  const list = document.createElement("ol");
  list.className = "feed";
  const empty = document.createElement("p");
  empty.className = "feed-empty";
  empty.textContent = "no events yet";
  container.replaceChildren(empty, list);

  return (event: FeedEvent) => {
    empty.hidden = true;
    const item = document.createElement("li");
    item.dataset.seq = String(event.seq);
    item.dataset.kind = event.kind;
    if (event.kind === "unknown_job_notice" || event.kind === "manager_notice") {
      item.classList.add("escalated");
    }
    const summary =
      event.kind === "broker_selection"
        ? `offer ${String(event.payload["offerId"])} (carbon ${String(event.payload["carbonRate"])} g/h)`
        : `${String(event.payload["jobId"] ?? "")} ${String(event.payload["action"] ?? event.kind)}`;
    item.textContent = `#${event.seq} ${event.kind}: ${summary} @ ${event.at}`;
    list.appendChild(item);
  };
}
