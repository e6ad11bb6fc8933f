import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import type { EstimateResponse } from "../src/api.js";
import { WhatIfPanel } from "../src/whatif.js";

function estimateResponse(overrides: Partial<EstimateResponse> = {}): EstimateResponse {
  return {
    jobId: "J-STORAGE",
    registryRevision: 3,
    estimates: {
      local: {
        destination: "local",
        value: 210.0125,
        combine: "sum",
        terms: { local_machine_w: 210, local_disk_w: 0.0125 },
      },
      private: {
        destination: "private",
        value: 183.41546717171718,
        combine: "product",
        terms: {
          file_size_mb: 8000,
          downloads_per_second: 0.0005555555555555556,
          path_intensity_j_per_mb: 8.253696022727273,
          users: 5,
        },
      },
      public: {
        destination: "public",
        value: 201.19324494949495,
        combine: "product",
        terms: {
          file_size_mb: 8000,
          downloads_per_second: 0.0005555555555555556,
          path_intensity_j_per_mb: 9.053696022727274,
          users: 5,
        },
      },
    },
    compliant: ["local", "private"],
    recommendation: "private",
    rationale: ["excluded public: not compliant with policy"],
    advisories: [
      {
        serviceClass: "storage",
        component: "transport",
        deployment: "public",
        significance: "always",
        condition: "always significant",
        triggered: true,
      },
    ],
    ...overrides,
  };
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("what-if panel", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="panel"></div>';
    root = document.getElementById("panel")!;
  });

  it("renders every displayed number verbatim from the response payload", () => {
    const fetchSpy = vi.fn();
    const panel = new WhatIfPanel(root, new ApiClient("", fetchSpy));
    const payload = estimateResponse();
    panel.render(payload);

    for (const destination of ["local", "private", "public"] as const) {
      const card = root.querySelector<HTMLElement>(`[data-destination="${destination}"]`)!;
      expect(card.dataset.rawValue).toBe(String(payload.estimates[destination].value));
      const termNodes = card.querySelectorAll<HTMLElement>("dd");
      const raw = Array.from(termNodes).map((node) => node.dataset.rawValue);
      expect(raw).toEqual(Object.values(payload.estimates[destination].terms).map(String));
    }
    // rendering alone performs no API traffic and therefore no server-side arithmetic
    expect(fetchSpy).not.toHaveBeenCalled();
  });

  it("marks the recommended destination and it is always compliant", () => {
    const panel = new WhatIfPanel(root, new ApiClient("", vi.fn()));
    const payload = estimateResponse();
    panel.render(payload);
    const recommended = root.querySelector<HTMLElement>(".estimate-card.recommended")!;
    expect(recommended.dataset.destination).toBe("private");
    expect(payload.compliant).toContain(recommended.dataset.destination);
    expect(recommended.querySelector(".badge")?.textContent).toBe("greenest");
  });

  it("disables confirmation for non-compliant destinations and never calls the API for them", async () => {
    const fetchSpy = vi.fn();
    const panel = new WhatIfPanel(root, new ApiClient("", fetchSpy));
    panel.render(estimateResponse());

    const publicCard = root.querySelector<HTMLElement>('[data-destination="public"]')!;
    const button = publicCard.querySelector<HTMLButtonElement>("button.confirm")!;
    expect(button.disabled).toBe(true);
    expect(publicCard.querySelector(".compliance-reason")).not.toBeNull();

    button.click(); // disabled buttons do not fire, but guard the API path too
    await panel.confirm("public");
    expect(fetchSpy).not.toHaveBeenCalled();
  });

  it("confirms a compliant destination with the loaded revision attached", async () => {
    const fetchSpy = vi.fn(async (url: string, init?: RequestInit) => {
      expect(url).toBe("/jobs/J-STORAGE/destination");
      expect(init?.method).toBe("PUT");
      const body = JSON.parse(String(init?.body));
      expect(body).toMatchObject({ type: "local", ifRevision: 3 });
      return jsonResponse(200, { registryRevision: 4, entry: {} });
    });
    const confirmed = vi.fn();
    const panel = new WhatIfPanel(root, new ApiClient("", fetchSpy), { onConfirmed: confirmed });
    panel.render(estimateResponse());

    await panel.confirm("local");
    expect(fetchSpy).toHaveBeenCalledTimes(1);
    expect(confirmed).toHaveBeenCalledWith("local", 4);
  });

  it("shows a staleness warning and blocks confirms until re-estimate", async () => {
    const fetchSpy = vi.fn(async () =>
      jsonResponse(409, { error: { code: "STALE_REVISION", message: "registry moved to revision 5" } }),
    );
    const confirmed = vi.fn();
    const panel = new WhatIfPanel(root, new ApiClient("", fetchSpy), { onConfirmed: confirmed });
    panel.render(estimateResponse());

    await panel.confirm("local");
    expect(confirmed).not.toHaveBeenCalled();
    const warning = root.querySelector<HTMLElement>(".stale-warning")!;
    expect(warning.hidden).toBe(false);
    expect(warning.textContent).toContain("re-estimate");
    for (const button of root.querySelectorAll<HTMLButtonElement>("button.confirm")) {
      expect(button.disabled).toBe(true);
    }

    // further confirm attempts are swallowed client-side
    await panel.confirm("private");
    expect(fetchSpy).toHaveBeenCalledTimes(1);

    // a fresh estimate re-arms the panel
    panel.render(estimateResponse({ registryRevision: 5 }));
    expect(root.querySelector<HTMLElement>(".stale-warning")!.hidden).toBe(true);
    const local = root.querySelector<HTMLButtonElement>('[data-destination="local"] button.confirm')!;
    expect(local.disabled).toBe(false);
  });

  it("renders triggered advisories only", () => {
    const panel = new WhatIfPanel(root, new ApiClient("", vi.fn()));
    const payload = estimateResponse();
    payload.advisories.push({
      serviceClass: "storage",
      component: "storage",
      deployment: "private",
      significance: "conditional",
      condition: "downloads_per_hour < 1",
      triggered: false,
    });
    panel.render(payload);
    const items = root.querySelectorAll(".advisories li");
    expect(items).toHaveLength(1);
    expect(items[0].textContent).toContain("public/transport");
  });
});
