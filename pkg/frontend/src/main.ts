// Single-page console shell: three views (infrastructure, jobs & what-if,
// live feed) over the middleware management API.

import { ApiClient, ApiError } from "./api.js";
import type { JobEntry } from "./api.js";
import { EventFeed, renderFeed } from "./feed.js";
import { JobWhatIfForm } from "./form.js";
import { InfrastructureView } from "./infrastructure.js";
import { validateJobForm } from "./validation.js";
import { WhatIfPanel } from "./whatif.js";

const api = new ApiClient("");
const app = document.getElementById("app");

function tabButton(label: string, target: string, active = false): HTMLButtonElement {
  const button = document.createElement("button");
  button.textContent = label;
  button.dataset.target = target;
  button.className = active ? "tab active" : "tab";
  return button;
}

function describeDestination(entry: JobEntry): string {
  const destination = entry.destination;
  return destination.server ? `${destination.type}:${destination.server}` : destination.type;
}

async function refreshJobs(
  form: JobWhatIfForm,
  listBody: HTMLTableSectionElement,
  revisionBadge: HTMLElement,
) {
  const response = await api.jobs();
  revisionBadge.textContent = `registry revision ${response.registryRevision}`;
  listBody.replaceChildren();
  for (const entry of response.jobs) {
    const row = listBody.insertRow();
    row.insertCell().textContent = entry.id;
    row.insertCell().textContent = entry.class;
    row.insertCell().textContent = describeDestination(entry);
    row.insertCell().textContent = `${entry.audit.confirmedBy} @ ${entry.audit.confirmedAt}`;
    const action = row.insertCell();
    const whatIfButton = document.createElement("button");
    whatIfButton.textContent = "what-if";
    whatIfButton.addEventListener("click", () => form.load(entry));
    action.appendChild(whatIfButton);
  }
}

export function boot(): void {
  if (!app) {
    return;
  }
  const banner = document.createElement("div");
  banner.id = "banner";
  banner.className = "banner error";
  banner.hidden = true;

  const tabs = document.createElement("nav");
  const views: Record<string, HTMLElement> = {
    infrastructure: document.createElement("section"),
    jobs: document.createElement("section"),
    feed: document.createElement("section"),
  };
  views.infrastructure.id = "view-infrastructure";
  views.jobs.id = "view-jobs";
  views.feed.id = "view-feed";
  views.infrastructure.hidden = true;
  views.feed.hidden = true;

  tabs.append(
    tabButton("Jobs & What-If", "jobs", true),
    tabButton("Infrastructure", "infrastructure"),
    tabButton("Live Feed", "feed"),
  );
  tabs.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).dataset?.target;
    if (!target) {
      return;
    }
    for (const [name, view] of Object.entries(views)) {
      view.hidden = name !== target;
    }
    tabs.querySelectorAll(".tab").forEach((tab) => {
      tab.classList.toggle("active", (tab as HTMLElement).dataset.target === target);
    });
  });

  // jobs view: list, override form, what-if panel
  const revisionBadge = document.createElement("span");
  revisionBadge.className = "revision";
  const jobTable = document.createElement("table");
  jobTable.createTHead().insertRow().append(
    ...["job", "class", "destination", "confirmed", ""].map((text) => {
      const cell = document.createElement("th");
      cell.textContent = text;
      return cell;
    }),
  );
  const listBody = jobTable.createTBody();
  const formRoot = document.createElement("div");
  formRoot.id = "whatif-form";
  const panelRoot = document.createElement("div");
  panelRoot.id = "whatif";
  const panel = new WhatIfPanel(panelRoot, api, {
    onConfirmed: () => {
      void refreshJobs(form, listBody, revisionBadge);
    },
  });
  const form = new JobWhatIfForm(formRoot, api, {
    onEstimate: (estimate) => panel.render(estimate),
    onBanner: (message) => {
      banner.hidden = false;
      banner.textContent = message;
    },
  });
  views.jobs.append(revisionBadge, jobTable, formRoot, panelRoot);

  // infrastructure view
  const infraView = new InfrastructureView(views.infrastructure, api);

  // live feed view
  const feedStatus = document.createElement("p");
  feedStatus.id = "feed-status";
  const feedList = document.createElement("div");
  views.feed.append(feedStatus, feedList);
  let onEvent: ((event: import("./feed.js").FeedEvent) => void) | null = null;
  const feed = new EventFeed("", {
    onEvent: (event) => onEvent?.(event),
    onStatus: (status) => {
      feedStatus.textContent = status;
    },
  });
  onEvent = renderFeed(feedList, feed);
  feed.start();

  app.append(banner, tabs, views.jobs, views.infrastructure, views.feed);
  void refreshJobs(form, listBody, revisionBadge).catch((error: unknown) => {
    banner.hidden = false;
    banner.textContent = error instanceof ApiError ? error.message : String(error);
  });
  void infraView.refresh();
}

export { validateJobForm };

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
