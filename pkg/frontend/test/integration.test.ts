// End-to-end: a real middleware service on the bundled case-study registry,
// driven through the same client and panel the console ships.

import { spawn, type ChildProcess } from "node:child_process";
import { copyFileSync, existsSync, mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { basename, join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { WhatIfPanel } from "../src/whatif.js";

// vitest runs with cwd at frontend/; the middleware package sits one level up
const REPO_ROOT = basename(process.cwd()) === "frontend" ? resolve(process.cwd(), "..") : process.cwd();
const FIXTURE = join(REPO_ROOT, "src", "igca", "fixtures", "axy.xml");
if (!existsSync(FIXTURE)) {
  throw new Error(`case-study fixture not found at ${FIXTURE}`);
}

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const probe = createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolvePort(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitForHealth(base: string, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${base}/health`);
      if (response.ok) {
        return;
      }
    } catch (error) {
      lastError = error;
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`service did not come up: ${String(lastError)}`);
}

describe("console against a live service", () => {
  let child: ChildProcess | null = null;
  let workDir: string;
  let base: string;

  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "igca-console-"));
    const registryCopy = join(workDir, "axy.xml");
    copyFileSync(FIXTURE, registryCopy);
    const tcpPort = await freePort();
    const httpPort = await freePort();
    base = `http://127.0.0.1:${httpPort}`;
    child = spawn(
      "python3",
      ["-m", "igca.cli", "serve", "--registry", registryCopy,
       "--port", String(tcpPort), "--http-port", String(httpPort)],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
    );
    child.stderr?.on("data", (chunk: Buffer) => {
      process.stderr.write(`[serve] ${chunk.toString()}`);
    });
    await waitForHealth(base);
  });

  afterAll(async () => {
    if (child) {
      child.kill("SIGTERM");
      await new Promise((r) => setTimeout(r, 300));
      if (child.exitCode === null) {
        child.kill("SIGKILL");
      }
    }
    rmSync(workDir, { recursive: true, force: true });
  });

  it("what-if panel shows exactly the estimate response and highlights private for J-STORAGE", async () => {
    const api = new ApiClient(base);
    const estimate = await api.estimate("J-STORAGE");

    document.body.innerHTML = '<div id="panel"></div>';
    const root = document.getElementById("panel")!;
    const panel = new WhatIfPanel(root, api);
    panel.render(estimate);

    // the three displayed values are byte-identical to the API payload
    const direct = await fetch(`${base}/jobs/J-STORAGE/estimate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: "{}",
    }).then((r) => r.json() as Promise<typeof estimate>);
    for (const destination of ["local", "private", "public"] as const) {
      const card = root.querySelector<HTMLElement>(`[data-destination="${destination}"]`)!;
      expect(card.dataset.rawValue).toBe(String(direct.estimates[destination].value));
    }

    // the greenest badge sits on the private card
    const recommended = root.querySelector<HTMLElement>(".estimate-card.recommended")!;
    expect(recommended.dataset.destination).toBe("private");
    expect(direct.recommendation).toBe("private");
  });

  it("confirming a placement increments the displayed registry revision", async () => {
    const api = new ApiClient(base);
    const before = await api.estimate("J-STORAGE");

    document.body.innerHTML = '<div id="panel"></div>';
    const root = document.getElementById("panel")!;
    let confirmedRevision = -1;
    const panel = new WhatIfPanel(root, api, {
      onConfirmed: (_destination, revision) => {
        confirmedRevision = revision;
      },
    });
    panel.render(before);
    expect(root.querySelector<HTMLElement>(".whatif-header")!.dataset.revision).toBe(
      String(before.registryRevision),
    );

    await panel.confirm("local");
    expect(confirmedRevision).toBe(before.registryRevision + 1);

    // re-estimating shows the bumped revision in the header
    const after = await api.estimate("J-STORAGE");
    panel.render(after);
    expect(root.querySelector<HTMLElement>(".whatif-header")!.dataset.revision).toBe(
      String(before.registryRevision + 1),
    );
    const entry = await api.job("J-STORAGE");
    expect(entry.entry.destination).toEqual({ type: "local" });
  });
});
