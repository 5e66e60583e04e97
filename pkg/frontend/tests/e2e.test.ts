// End-to-end review round trip against a live backend: build a run with
// the real pipeline, serve it, accept one triple and edit another through
// the UI action layer, emit the KB CSV, and verify the decision log
// replays to the identical queue state after a service restart.

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { decideSelected, refreshQueue } from "../src/controller";
import { initialState, selectedItem, withFilters } from "../src/state";
import type { TriplePayload } from "../src/types";

const execFileAsync = promisify(execFile);

const PORT = 8900 + (process.pid % 97);
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.PENKB_PYTHON ?? "python3";

let workdir: string;
let configPath: string;
let server: ChildProcess | null = null;

function writeConfig(): void {
  workdir = mkdtempSync(join(tmpdir(), "penkb-e2e-"));
  configPath = join(workdir, "config.yaml");
  const config = `
run_id: e2e
workdir: ${join(workdir, "runs")}
data:
  synthetic:
    seed: 404
    n_docs: 8
    genes_per_doc: [2, 3]
    estimate_range: [0.4, 25.0]
    negative_pair_rate: 0.4
repr: {mode: tfidf, embedding_dim: 48, hash_seed: 7}
split: {ratios: [0.6, 0.2, 0.2], seed: 13}
encoder: {dim: 32, layers: 2, heads: 2, max_len: 64, seed: 5}
ascertainment: {kind: logistic, seed: 6, C: 10.0}
extraction: {mode: joint, lr: 1.0e-3, epochs: 60, schedule: constant, seed: 5}
service: {host: 127.0.0.1, port: ${PORT}}
`;
  writeFileSync(configPath, config, "utf-8");
}

async function startServer(): Promise<void> {
  server = spawn(PYTHON, ["-m", "penkb.cli", "serve", "--config", configPath],
                 { stdio: ["ignore", "pipe", "pipe"] });
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/queue`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error("backend did not come up in time");
}

async function stopServer(): Promise<void> {
  if (!server) return;
  const child = server;
  server = null;
  child.kill("SIGTERM");
  await new Promise((resolve) => {
    child.once("exit", resolve);
    setTimeout(resolve, 5_000);
  });
}

beforeAll(async () => {
  writeConfig();
  await execFileAsync(
    PYTHON,
    ["-m", "penkb.cli", "run", "--config", configPath,
     "--stages", "ingest,label,train_asc,train_er,predict"],
    { timeout: 200_000 },
  );
  await startServer();
});

afterAll(async () => {
  await stopServer();
});

describe("review round trip", () => {
  it("accept + edit land in the KB CSV and replay after restart", async () => {
    const client = new ApiClient(BASE, "e2e-clinician");

    // Triage exactly as the UI does: filtered queue, keyboard-order actions.
    let state = await refreshQueue(
      withFilters(initialState(), { kind: "risk_triple" }), client);
    expect(state.items.length).toBeGreaterThanOrEqual(2);
    const pendingBefore = state.items.map((i) => i.item_id);

    const first = selectedItem(state)!;
    const firstPayload = first.payload as TriplePayload;
    state = await decideSelected(state, client, "accepted");
    expect(state.banner).toBeNull();
    expect(state.items.map((i) => i.item_id)).not.toContain(first.item_id);

    const second = selectedItem(state)!;
    expect(second.item_id).not.toBe(first.item_id);
    state = await decideSelected(state, client, "edited", { estimate: "6.66" });
    expect(state.banner).toBeNull();

    // Emitted KB CSV holds exactly the two decided rows, with the edit.
    const emitted = await client.emitKb();
    expect(emitted.problems).toEqual([]);
    expect(emitted.n_rows).toBe(2);
    const byDecision = Object.fromEntries(
      emitted.rows.map((row) => [row["Reviewer Decision"], row]));
    expect(byDecision.accepted["Gene"]).toBe(firstPayload.gene);
    // estimates round-trip through a decimal column ("6.20" -> "6.2")
    expect(Number(byDecision.accepted["OR"])).toBe(Number(firstPayload.estimate));
    expect(byDecision.edited["Gene"]).toBe((second.payload as TriplePayload).gene);
    expect(byDecision.edited["OR"]).toBe("6.66");

    const csv = readFileSync(emitted.path, "utf-8").trim().split("\n");
    expect(csv).toHaveLength(3); // header + exactly the two decided rows
    expect(csv[0].startsWith("PMID,Gene,Cancer,Race,OR,RR,HR")).toBe(true);
    expect(csv.slice(1).some((line) => line.includes("6.66"))).toBe(true);

    // Restart the service: replaying the decision log must reproduce the
    // exact pending set and still refuse a second decision.
    await stopServer();
    await startServer();
    const replayed = await refreshQueue(
      withFilters(initialState(), { kind: "risk_triple" }), client);
    const pendingAfter = replayed.items.map((i) => i.item_id);
    expect(pendingAfter).toEqual(
      pendingBefore.filter((id) => id !== first.item_id && id !== second.item_id));

    let conflict: number | null = null;
    try {
      await client.decide(first.item_id, "rejected");
    } catch (err) {
      conflict = (err as { status?: number }).status ?? null;
    }
    expect(conflict).toBe(409);

    // The emitted CSV is reproducible from the replayed state.
    const reEmitted = await client.emitKb();
    expect(reEmitted.n_rows).toBe(2);
    expect(reEmitted.rows).toEqual(emitted.rows);
  });
});
