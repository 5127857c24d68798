/** DOM wiring: the only file that touches the document. All behavior
 * lives in state.ts / render.ts / api.ts, which the tests cover. */

import { ApiClient, ApiError, type QueryRequest } from "./api.js";
import {
  beginSubmit,
  buildRequest,
  completeSubmit,
  failSubmit,
  initialState,
  rerunRequest,
  submitBlocker,
  withBooks,
  type UiState,
} from "./state.js";
import { renderBookOptions, renderError, renderHistory, renderResults } from "./render.js";

const api = new ApiClient("");
let state: UiState = initialState();
let lastRequest: QueryRequest | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function draw(): void {
  el<HTMLSelectElement>("book").innerHTML = renderBookOptions(state.books, state.selectedBook);
  el("error").innerHTML = renderError(state.error);
  el("history").innerHTML = renderHistory(state.history);
  const last = state.history[state.history.length - 1];
  el("results").innerHTML = last ? renderResults(last.response) : "";
  const button = el<HTMLButtonElement>("submit");
  button.disabled = submitBlocker(state) !== null;
  button.textContent = state.pending ? "querying..." : "search";
}

async function send(request: QueryRequest): Promise<void> {
  state = beginSubmit(state);
  lastRequest = request;
  draw();
  try {
    const response = await api.query(request);
    state = completeSubmit(state, request, response);
  } catch (err) {
    if (err instanceof ApiError) {
      state = failSubmit(state, err.detail);
    } else {
      state = failSubmit(state, "network failure; the server may be down");
    }
  }
  draw();
}

function onSubmit(): void {
  if (submitBlocker(state) !== null) return;
  void send(buildRequest(state));
}

function bind(): void {
  el<HTMLSelectElement>("book").addEventListener("change", (ev) => {
    state = { ...state, selectedBook: (ev.target as HTMLSelectElement).value };
    draw();
  });
  el<HTMLInputElement>("prompt").addEventListener("input", (ev) => {
    state = { ...state, prompt: (ev.target as HTMLInputElement).value };
    el<HTMLButtonElement>("submit").disabled = submitBlocker(state) !== null;
  });
  el<HTMLSelectElement>("n").addEventListener("change", (ev) => {
    state = { ...state, n: Number((ev.target as HTMLSelectElement).value) };
  });
  el<HTMLInputElement>("k").addEventListener("change", (ev) => {
    state = { ...state, k: Number((ev.target as HTMLInputElement).value) };
  });
  el<HTMLSelectElement>("retriever").addEventListener("change", (ev) => {
    state = {
      ...state,
      retriever: (ev.target as HTMLSelectElement).value as UiState["retriever"],
    };
  });
  el<HTMLFormElement>("query-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    onSubmit();
  });
  el("history").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains("rerun") || state.pending) return;
    void send(rerunRequest(state, Number(target.dataset.entryId)));
  });
  el("error").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (!target.classList.contains("retry") || state.pending || !lastRequest) return;
    void send(lastRequest);
  });
}

async function start(): Promise<void> {
  bind();
  try {
    state = withBooks(state, await api.books());
  } catch {
    state = failSubmit(state, "could not load the book list; is the server up?");
  }
  draw();
}

void start();
