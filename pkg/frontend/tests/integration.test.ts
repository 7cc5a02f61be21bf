/** End-to-end review loop against a real curator server (seeded demo store).
 *
 * Spawns `python3 -m agavescan.devserver`, drives the same code paths the UI
 * buttons use (ReviewQueue + polygon editing ops), and checks the dataset
 * report after promotion.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { dragVertex } from "../src/polygon.js";
import { loadProgress } from "../src/progress.js";
import { ReviewQueue } from "../src/queue.js";

const PORT = 8870 + Math.floor(Math.random() * 100);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let storeDir: string;
let api: ApiClient;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/phases/1/report`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("curator devserver did not come up");
}

beforeAll(async () => {
  storeDir = mkdtempSync(join(tmpdir(), "agavescan-ui-test-"));
  server = spawn(
    "python3",
    ["-m", "agavescan.devserver", "--store", storeDir, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  api = new ApiClient(BASE);
  await waitForServer();
});

afterAll(async () => {
  server.kill();
  await new Promise((r) => setTimeout(r, 300));
  rmSync(storeDir, { recursive: true, force: true });
});

describe("review loop round trip", () => {
  it("approves one, edits one, rejects one, and grows the dataset by 2 labels", async () => {
    const session = await api.openSession(2, ["synth"]);
    const queue = new ReviewQueue(api, session.session_id, "integration");
    await queue.refresh();
    expect(queue.pending.map((p) => p.proposalId)).toEqual([
      "demo_prop_0",
      "demo_prop_1",
      "demo_prop_2",
    ]);

    const before = await api.getReport(1);
    expect(before.phase).toBe(1);
    const labelsBefore = before.labels;

    // approve the first card
    const approved = await queue.submitDecision("demo_prop_0", "approve");
    expect(approved.accepted).toBe(true);

    // edit the second: drag one vertex 10 px and submit
    const view = queue.find("demo_prop_1")!;
    const edited = dragVertex(view.vertices, 1, [
      view.vertices[1][0] + 10,
      view.vertices[1][1] + 6,
    ]);
    const editResult = await queue.submitDecision("demo_prop_1", "edit", edited);
    expect(editResult.accepted).toBe(true);

    // reject the third; the queue is now empty (empty-state screen)
    const rejected = await queue.submitDecision("demo_prop_2", "reject");
    expect(rejected.accepted).toBe(true);
    expect(queue.pending.length).toBe(0);

    const progress = await api.getProgress(session.session_id);
    expect(progress).toEqual({ pending: 0, decided: 3, total: 3 });

    // promote and verify the next phase reflects exactly +2 labels
    const promoted = await api.promotePhase(1);
    expect(promoted.phase).toBe(2);
    const report = await api.getReport(2);
    expect(report.labels).toBe(labelsBefore + 2);

    // the progress panel model renders the post-promotion counts
    const model = await loadProgress(api, session.session_id, [1, 2]);
    expect(model.stale).toBe(false);
    expect(model.reports.map((r) => r.phase)).toEqual([1, 2]);
  });

  it("surfaces a live 409 to the conflict path", async () => {
    const session = await api.openSession(2, ["synth"]);
    // demo_prop_0 was decided above; a fresh queue instance (no local guard)
    // hits the server conflict and rolls back
    const queue = new ReviewQueue(api, session.session_id, "latecomer");
    await queue.refresh();
    const result = await queue.submitDecision("demo_prop_0", "reject");
    expect(result.accepted).toBe(false);
    expect(result.conflict).toBe(true);
    expect(queue.find("demo_prop_0")!.status).toBe("approved");
  });
});
