/** Client-side state and the transitions around query submission.
 *
 * All functions are pure: they take a state and return a new one, so the
 * tests pin the rules directly. History is append-only; a failed request
 * never mutates it. One query may be in flight at a time.
 */

import type { BookInfo, QueryRequest, QueryResponse } from "./api.js";

export interface HistoryEntry {
  id: number;
  request: QueryRequest;
  response: QueryResponse;
}

export interface UiState {
  books: BookInfo[];
  selectedBook: string | null;
  n: number;
  k: number;
  retriever: "bm25" | "dense";
  prompt: string;
  pending: boolean;
  error: string | null;
  history: readonly HistoryEntry[];
  nextId: number;
}

export function initialState(): UiState {
  return {
    books: [],
    selectedBook: null,
    n: 1,
    k: 10,
    retriever: "bm25",
    prompt: "",
    pending: false,
    error: null,
    history: [],
    nextId: 1,
  };
}

export function withBooks(state: UiState, books: BookInfo[]): UiState {
  const stillValid = books.some((b) => b.book_id === state.selectedBook);
  return {
    ...state,
    books,
    selectedBook: stillValid ? state.selectedBook : (books[0]?.book_id ?? null),
  };
}

/** Reason the submit button is disabled, or null when a query may go out. */
export function submitBlocker(state: UiState): string | null {
  if (state.pending) return "a query is already in flight";
  if (state.selectedBook === null) return "select a book first";
  if (state.prompt.trim() === "") return "enter a prompt";
  return null;
}

export function buildRequest(state: UiState): QueryRequest {
  const blocker = submitBlocker(state);
  if (blocker !== null) throw new Error(blocker);
  return {
    book_id: state.selectedBook as string,
    prompt: state.prompt.trim(),
    n: state.n,
    k: state.k,
    retriever: state.retriever,
  };
}

export function beginSubmit(state: UiState): UiState {
  return { ...state, pending: true, error: null };
}

/** Append the finished round trip; the prompt stays for refinement. */
export function completeSubmit(
  state: UiState,
  request: QueryRequest,
  response: QueryResponse,
): UiState {
  return {
    ...state,
    pending: false,
    error: null,
    history: [...state.history, { id: state.nextId, request, response }],
    nextId: state.nextId + 1,
  };
}

/** Record the failure without touching history or the prompt, so the user
 * can retry as-is. */
export function failSubmit(state: UiState, message: string): UiState {
  return { ...state, pending: false, error: message };
}

/** The request behind a history entry, for one-click re-running. */
export function rerunRequest(state: UiState, entryId: number): QueryRequest {
  const entry = state.history.find((e) => e.id === entryId);
  if (!entry) throw new Error(`no history entry ${entryId}`);
  return entry.request;
}
