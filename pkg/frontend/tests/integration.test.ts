/** Roundtrip against a real served toy corpus.
 *
 * Builds artifacts with the CLI, starts the HTTP service, and drives the
 * same state transitions main.ts uses: submit renders the server's top-k
 * in order, re-running a history entry returns an identical response, and
 * error states (unknown book, server down) never lose the prompt.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, type QueryResponse } from "../src/api.js";
import {
  beginSubmit,
  buildRequest,
  completeSubmit,
  failSubmit,
  initialState,
  rerunRequest,
  withBooks,
  type UiState,
} from "../src/state.js";
import { renderResults } from "../src/render.js";

let workdir: string;
let server: ChildProcess | null = null;
let client: ApiClient;

function cli(...args: string[]): void {
  const run = spawnSync("python3", ["-m", "litquest.cli", ...args], { encoding: "utf-8" });
  if (run.status !== 0) {
    throw new Error(`litquest ${args[0]} failed: ${run.stderr}`);
  }
}

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitForHealth(api: ApiClient, attempts = 60): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    try {
      await api.health();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 250));
    }
  }
  throw new Error("service never became healthy");
}

/** Drive one submission exactly as the page handler does. */
async function submit(state: UiState, api: ApiClient): Promise<UiState> {
  const request = buildRequest(state);
  const inflight = beginSubmit(state);
  try {
    return completeSubmit(inflight, request, await api.query(request));
  } catch (err) {
    const message = err instanceof ApiError ? err.detail : "network failure; the server may be down";
    return failSubmit(inflight, message);
  }
}

function withoutTiming(response: QueryResponse): Omit<QueryResponse, "timing_ms"> {
  const { timing_ms: _timing, ...rest } = response;
  return rest;
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "litquest-ui-"));
  const art = join(workdir, "artifacts");
  const bookPath = join(workdir, "toy.txt");
  const sentences = Array.from(
    { length: 40 },
    (_, i) => `Sentence ${i} carries word${i} and word${i + 1} tokens.`,
  );
  writeFileSync(bookPath, sentences.join(" "));
  cli("ingest", "--book", bookPath, "--title", "Toy Book", "--artifacts-dir", art);
  cli("index", "--book-id", "toy", "--n", "1", "2", "--artifacts-dir", art);

  const port = await freePort();
  server = spawn(
    "python3",
    ["-m", "litquest.cli", "serve", "--port", String(port), "--artifacts-dir", art],
    { stdio: "ignore" },
  );
  client = new ApiClient(`http://127.0.0.1:${port}`);
  await waitForHealth(client);
}, 45_000);

afterAll(() => {
  server?.kill("SIGTERM");
  rmSync(workdir, { recursive: true, force: true });
});

describe("UI roundtrip against the live service", () => {
  it("populates books from the server", async () => {
    const state = withBooks(initialState(), await client.books());
    expect(state.selectedBook).toBe("toy");
    expect(state.books[0]?.title).toBe("Toy Book");
    expect(state.books[0]?.available_n).toEqual([1, 2]);
  });

  it("submitting a prompt renders the server's top-k in order", async () => {
    let state = withBooks(initialState(), await client.books());
    state = { ...state, prompt: "word7 tokens", k: 5 };
    state = await submit(state, client);
    expect(state.error).toBeNull();
    expect(state.history.length).toBe(1);

    const response = state.history[0]!.response;
    expect(response.query).toBe("word7 tokens [MASK]");
    expect(response.results.length).toBe(5);
    const html = renderResults(response);
    const renderedStarts = [...html.matchAll(/data-start="(\d+)"/g)].map((m) => Number(m[1]));
    expect(renderedStarts).toEqual(response.results.map((r) => r.start));
    const scores = response.results.map((r) => r.score);
    expect([...scores].sort((a, b) => b - a)).toEqual(scores);
  });

  it("re-running a history entry returns an identical response", async () => {
    let state = withBooks(initialState(), await client.books());
    state = { ...state, prompt: "word12 and word13", k: 7 };
    state = await submit(state, client);
    expect(state.history.length).toBe(1);

    const rerun = rerunRequest(state, state.history[0]!.id);
    const inflight = beginSubmit(state);
    state = completeSubmit(inflight, rerun, await client.query(rerun));
    expect(state.history.length).toBe(2);
    expect(withoutTiming(state.history[1]!.response)).toEqual(
      withoutTiming(state.history[0]!.response),
    );
  });

  it("an unknown book renders an error without losing prompt or history", async () => {
    let state = withBooks(initialState(), await client.books());
    state = { ...state, prompt: "the storm", k: 3 };
    state = await submit(state, client);
    expect(state.history.length).toBe(1);

    const broken = { ...state, selectedBook: "ghost" };
    const failed = await submit(broken, client);
    expect(failed.error).toContain("ghost");
    expect(failed.prompt).toBe("the storm");
    expect(failed.history.length).toBe(1);
    expect(failed.pending).toBe(false);
  });

  it("a missing artifact maps to a build-hint error", async () => {
    let state = withBooks(initialState(), await client.books());
    state = { ...state, prompt: "anything", n: 5 };
    const failed = await submit(state, client);
    expect(failed.error).toContain("litquest index");
    expect(failed.history.length).toBe(0);
  });

  it("server down is a network failure that keeps the prompt", async () => {
    let state = withBooks(initialState(), await client.books());
    state = { ...state, prompt: "still here" };
    server?.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 500));
    const failed = await submit(state, client);
    expect(failed.error).toMatch(/network failure/);
    expect(failed.prompt).toBe("still here");
    expect(failed.pending).toBe(false);
  });
});
