// Infrastructure view: read-only tables for machines, servers and paths,
// plus an editable threshold form saved through PUT /infrastructure.

import { ApiClient, ApiError } from "./api.js";
import type { InfrastructureResponse } from "./api.js";

function table(headers: string[], rows: (string | number)[][]): HTMLTableElement {
  const element = document.createElement("table");
  const head = element.createTHead().insertRow();
  for (const header of headers) {
    const cell = document.createElement("th");
    cell.textContent = header;
    head.appendChild(cell);
  }
  const body = element.createTBody();
  for (const row of rows) {
    const tr = body.insertRow();
    for (const value of row) {
      tr.insertCell().textContent = String(value);
    }
  }
  return element;
}

export class InfrastructureView {
  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly onSaved?: (revision: number) => void,
  ) {}

  async refresh(): Promise<void> {
    let response: InfrastructureResponse;
    try {
      response = await this.api.infrastructure();
    } catch (error) {
      const banner = document.createElement("div");
      banner.className = "banner error";
      banner.textContent = error instanceof ApiError ? error.message : String(error);
      this.root.replaceChildren(banner);
      return;
    }
    const infra = response.infrastructure;
    this.root.replaceChildren();

    const machines = document.createElement("section");
    machines.append(
      Object.assign(document.createElement("h3"), { textContent: "client machines" }),
      table(
        ["id", "power W", "disk GB", "disk W"],
        infra.machines.map((m) => [m.id, m.powerW, m.diskGb, m.diskPowerW]),
      ),
    );

    const servers = document.createElement("section");
    servers.append(
      Object.assign(document.createElement("h3"), { textContent: "private-cloud servers" }),
      table(
        ["id", "function", "frequency", "mode", "capacity Mb/s", "power W", "disk GB", "disk W", "users"],
        infra.servers.map((s) => [
          s.id, s.function, s.frequency, s.mode, s.capacityMbps, s.powerW, s.diskGb, s.diskPowerW, s.users,
        ]),
      ),
    );

    const paths = document.createElement("section");
    paths.appendChild(Object.assign(document.createElement("h3"), { textContent: "transport paths" }));
    for (const [scope, elements] of Object.entries(infra.paths)) {
      paths.appendChild(Object.assign(document.createElement("h4"), { textContent: scope }));
      paths.appendChild(
        table(["element", "power W", "capacity Mb/s"], elements.map((e) => [e.name, e.powerW, e.capacityMbps])),
      );
    }

    const thresholds = document.createElement("form");
    thresholds.className = "thresholds";
    thresholds.appendChild(Object.assign(document.createElement("h3"), { textContent: "advisory thresholds" }));
    for (const [name, value] of Object.entries(infra.thresholds)) {
      const label = document.createElement("label");
      label.textContent = name;
      const input = document.createElement("input");
      input.name = name;
      input.type = "number";
      input.step = "any";
      input.value = String(value);
      label.appendChild(input);
      thresholds.appendChild(label);
    }
    const save = document.createElement("button");
    save.type = "submit";
    save.textContent = "save thresholds";
    thresholds.appendChild(save);
    const status = document.createElement("p");
    status.className = "status";
    thresholds.appendChild(status);
    thresholds.addEventListener("submit", (event) => {
      event.preventDefault();
      const updated = { ...infra, thresholds: { ...infra.thresholds } };
      for (const input of thresholds.querySelectorAll("input")) {
        updated.thresholds[input.name] = Number(input.value);
      }
      void this.api
        .putInfrastructure(updated)
        .then((result) => {
          status.textContent = `saved at revision ${result.registryRevision}`;
          this.onSaved?.(result.registryRevision);
        })
        .catch((error: unknown) => {
          status.textContent = error instanceof ApiError ? error.message : String(error);
        });
    });

    this.root.append(machines, servers, paths, thresholds);
  }
}
