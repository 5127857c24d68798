/** HTML fragments for every view, as pure string builders.
 *
 * The results list is rendered exactly in server order; nothing here sorts
 * or filters. Keeping these DOM-free makes the ordering and banner rules
 * directly testable.
 */

import type { BookInfo, QueryResponse } from "./api.js";
import type { HistoryEntry } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderBookOptions(books: BookInfo[], selected: string | null): string {
  if (books.length === 0) return '<option value="" disabled>no books ingested</option>';
  return books
    .map((b) => {
      const sel = b.book_id === selected ? " selected" : "";
      const label = `${b.title} (${b.sentence_count} sentences)`;
      return `<option value="${escapeHtml(b.book_id)}"${sel}>${escapeHtml(label)}</option>`;
    })
    .join("");
}

function contextBlock(lines: string[], cls: string): string {
  if (lines.length === 0) return "";
  return `<div class="${cls}">${lines.map((s) => escapeHtml(s)).join(" ")}</div>`;
}

export function renderResults(response: QueryResponse): string {
  const parts: string[] = [];
  if (response.capped) {
    parts.push('<div class="banner">fewer candidates than requested</div>');
  }
  if (response.results.length === 0) {
    parts.push('<p class="empty">no candidates</p>');
    return parts.join("\n");
  }
  parts.push('<ol class="results">');
  for (const r of response.results) {
    parts.push(
      `<li class="result" data-rank="${r.rank}" data-start="${r.start}">` +
        `<span class="score">${r.score.toFixed(4)}</span> ` +
        `<span class="text">${escapeHtml(r.text)}</span>` +
        `<details class="context"><summary>context</summary>` +
        contextBlock(r.context_before, "before") +
        contextBlock(r.context_after, "after") +
        `</details></li>`,
    );
  }
  parts.push("</ol>");
  return parts.join("\n");
}

export function renderHistory(history: readonly HistoryEntry[]): string {
  if (history.length === 0) return '<p class="empty">no queries yet</p>';
  return (
    '<ul class="history">' +
    history
      .map(
        (e) =>
          `<li data-entry-id="${e.id}">` +
          `<button class="rerun" data-entry-id="${e.id}">re-run</button> ` +
          `<span class="prompt">${escapeHtml(e.request.prompt ?? "")}</span> ` +
          `<span class="meta">${escapeHtml(e.request.retriever)}, n=${e.request.n}, ` +
          `top ${e.response.results.length}/${e.response.num_candidates}</span></li>`,
      )
      .join("") +
    "</ul>"
  );
}

export function renderError(message: string | null): string {
  if (message === null) return "";
  return `<div class="error" role="alert">${escapeHtml(message)} <button class="retry">retry</button></div>`;
}
