// The what-if panel: three destination cards (value + term breakdown),
// compliance markers, a recommendation badge and confirm buttons. Values
// are rendered verbatim from the estimate response; each card also carries
// the raw payload number in a data attribute so tests can verify that no
// arithmetic happened on this side.

import { ApiClient, ApiError } from "./api.js";
import type { Destination, EstimateResponse } from "./api.js";

export interface WhatIfHandlers {
  onConfirmed?: (destination: Destination, registryRevision: number) => void;
  onStale?: (message: string) => void;
  confirmedBy?: string;
}

const DESTINATIONS: Destination[] = ["local", "private", "public"];

export class WhatIfPanel {
  private response: EstimateResponse | null = null;
  private stale = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly handlers: WhatIfHandlers = {},
  ) {}

  get loadedRevision(): number | null {
    return this.response?.registryRevision ?? null;
  }

  render(response: EstimateResponse): void {
    this.response = response;
    this.stale = false;
    this.root.replaceChildren();

    const header = document.createElement("div");
    header.className = "whatif-header";
    header.dataset.revision = String(response.registryRevision);
    header.textContent = `what-if for ${response.jobId} (registry revision ${response.registryRevision})`;
    this.root.appendChild(header);

    const cards = document.createElement("div");
    cards.className = "whatif-cards";
    for (const destination of DESTINATIONS) {
      cards.appendChild(this.card(response, destination));
    }
    this.root.appendChild(cards);

    const advisories = document.createElement("ul");
    advisories.className = "advisories";
    for (const advisory of response.advisories.filter((a) => a.triggered)) {
      const item = document.createElement("li");
      item.textContent = `${advisory.deployment}/${advisory.component}: ${advisory.condition}`;
      advisories.appendChild(item);
    }
    this.root.appendChild(advisories);

    const warning = document.createElement("div");
    warning.className = "stale-warning";
    warning.hidden = true;
    this.root.appendChild(warning);
  }

  private card(response: EstimateResponse, destination: Destination): HTMLElement {
    const estimate = response.estimates[destination];
    const compliant = response.compliant.includes(destination);
    const recommended = response.recommendation === destination;

    const card = document.createElement("section");
    card.className = "estimate-card";
    card.dataset.destination = destination;
    card.dataset.rawValue = String(estimate.value);
    card.dataset.compliant = String(compliant);
    if (recommended) {
      card.classList.add("recommended");
    }

    const title = document.createElement("h3");
    title.textContent = destination;
    if (recommended) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = "greenest";
      title.appendChild(badge);
    }
    card.appendChild(title);

    const value = document.createElement("p");
    value.className = "value";
    value.textContent = `${estimate.value.toFixed(2)} W`;
    card.appendChild(value);

    const terms = document.createElement("dl");
    terms.className = "terms";
    for (const [name, term] of Object.entries(estimate.terms)) {
      const dt = document.createElement("dt");
      dt.textContent = name;
      const dd = document.createElement("dd");
      dd.dataset.rawValue = String(term);
      dd.textContent = term.toFixed(4);
      terms.append(dt, dd);
    }
    card.appendChild(terms);

    if (!compliant) {
      const reason = document.createElement("p");
      reason.className = "compliance-reason";
      reason.textContent = "not compliant with the job's policy";
      card.appendChild(reason);
    }

    const confirm = document.createElement("button");
    confirm.className = "confirm";
    confirm.textContent = `confirm ${destination}`;
    confirm.disabled = !compliant;
    if (compliant) {
      confirm.addEventListener("click", () => {
        void this.confirm(destination);
      });
    }
    card.appendChild(confirm);
    return card;
  }

  private warningBox(): HTMLElement | null {
    return this.root.querySelector(".stale-warning");
  }

  async confirm(destination: Destination): Promise<void> {
    if (!this.response || this.stale) {
      return;
    }
    if (!this.response.compliant.includes(destination)) {
      return; // disabled in the UI; never reaches the API
    }
    const server = destination === "private" ? this.serverFor() : undefined;
    try {
      const result = await this.api.confirmDestination(this.response.jobId, destination, {
        server,
        ifRevision: this.response.registryRevision,
        confirmedBy: this.handlers.confirmedBy ?? "console",
      });
      this.handlers.onConfirmed?.(destination, result.registryRevision);
    } catch (error) {
      if (error instanceof ApiError && error.code === "STALE_REVISION") {
        this.markStale(error.message);
        return;
      }
      const box = this.warningBox();
      if (box && error instanceof ApiError) {
        box.hidden = false;
        box.textContent = `confirmation failed: ${error.message}`;
      }
      if (!(error instanceof ApiError)) {
        throw error;
      }
    }
  }

  private serverFor(): string | undefined {
    // the offer/server choice for private placements is made server-side at
    // routing time for public, but private confirmations need a server id;
    // the panel exposes whichever the caller seeded via data attribute.
    return this.root.dataset.privateServer;
  }

  private markStale(message: string): void {
    this.stale = true;
    const box = this.warningBox();
    if (box) {
      box.hidden = false;
      box.textContent = `registry changed since this estimate (${message}); re-estimate before confirming`;
    }
    this.root.querySelectorAll<HTMLButtonElement>("button.confirm").forEach((button) => {
      button.disabled = true;
    });
  }
}
