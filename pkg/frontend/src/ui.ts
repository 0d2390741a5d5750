// Render helpers: plain state -> HTML string functions, no framework.
// index.ts swaps them into the page; tests assert on the markup directly.

import type { Attestation, Catalog, Proposal } from "./api.js";
import type { ConsoleState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderCatalog(catalog: Catalog | null): string {
  if (!catalog) {
    return "<p>catalog not loaded</p>";
  }
  const rows = catalog.items.map((item) =>
    `<tr><td>${escapeHtml(item.item_id)}</td><td class="amount">${escapeHtml(item.price)}</td>`
    + `<td><button class="buy" data-item="${escapeHtml(item.item_id)}">buy</button></td></tr>`,
  );
  return `<table><thead><tr><th>item</th><th>price</th><th></th></tr></thead>`
    + `<tbody>${rows.join("")}</tbody></table>`
    + `<p class="hint">direct settlement up to ${escapeHtml(catalog.sof_threshold)}, `
    + `tranche plan above it</p>`;
}

export function renderPhase(state: ConsoleState): string {
  const badge = `<span class="phase phase-${state.phase}">${state.phase}</span>`;
  if (state.phase === "error" && state.error) {
    return `${badge} <span class="error">${escapeHtml(state.error)}</span>`;
  }
  if (state.phase === "delivered" && state.deliveredContent) {
    return `${badge} <span class="content">${escapeHtml(state.deliveredContent)}</span>`;
  }
  return badge;
}

export function renderProposal(proposal: Proposal | null): string {
  if (!proposal) {
    return "";
  }
  const rows = proposal.tranches.map((t) => {
    const extra = t.kind === "escrow"
      ? ` (condition ${escapeHtml(t.condition_id ?? "")}, releaser ${escapeHtml(t.releaser ?? "")})`
      : "";
    return `<li>tranche ${t.tranche}: ${escapeHtml(t.amount)} ${t.kind}${extra}</li>`;
  });
  const status = proposal.accepted ? "accepted" : "awaiting acceptance";
  return `<p>${escapeHtml(proposal.proposal_id)}: ${status}</p><ul>${rows.join("")}</ul>`;
}

export function renderAttestations(attestations: Attestation[]): string {
  if (attestations.length === 0) {
    return "<p>no attestations yet</p>";
  }
  const rows = attestations.map((a) => {
    const parts = a.aggregate.parts
      .map((p) => `${escapeHtml(p.policy_id)}=${p.value}`)
      .join(", ");
    return `<tr><td>${a.round}</td>`
      + `<td class="verdict verdict-${a.aggregate.overall}">${a.aggregate.overall}</td>`
      + `<td>${parts}</td><td>${a.recorded_at}</td>`
      + `<td class="hash" title="${escapeHtml(a.hash)}">${escapeHtml(a.hash.slice(0, 12))}…</td></tr>`;
  });
  return `<table><thead><tr><th>round</th><th>verdict</th><th>policies</th>`
    + `<th>seq</th><th>hash</th></tr></thead><tbody>${rows.join("")}</tbody></table>`;
}

export function renderBalances(balances: Record<string, string>): string {
  const entries = Object.entries(balances);
  if (entries.length === 0) {
    return "";
  }
  const rows = entries.map(
    ([account, balance]) =>
      `<tr><td>${escapeHtml(account)}</td><td class="amount">${escapeHtml(balance)}</td></tr>`,
  );
  return `<table><tbody>${rows.join("")}</tbody></table>`;
}

export function renderLog(state: ConsoleState): string {
  return state.log
    .map((line) => `<div class="log-line">${escapeHtml(line.text)}</div>`)
    .join("");
}
