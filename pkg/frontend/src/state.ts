// Console state. One purchase at a time; every gateway interaction appends
// a log line so the whole exchange stays visible.

import type { Attestation, Catalog, PaymentRequirements, Proposal } from "./api.js";

export type Phase =
  | "idle"
  | "challenged"
  | "pending"
  | "accepted"
  | "tranche1_settled"
  | "locked"
  | "released"
  | "delivered"
  | "failed"
  | "error";

export interface LogLine {
  at: string;
  text: string;
}

export interface ConsoleState {
  gatewayUrl: string;
  buyerId: string;
  catalog: Catalog | null;
  phase: Phase;
  requirements: PaymentRequirements | null;
  proposal: Proposal | null;
  lockId: string | null;
  attestations: Attestation[];
  balances: Record<string, string>;
  deliveredContent: string | null;
  requiredEvidence: string[];
  log: LogLine[];
  error: string | null;
}

export function initialState(gatewayUrl: string, buyerId: string): ConsoleState {
  return {
    gatewayUrl,
    buyerId,
    catalog: null,
    phase: "idle",
    requirements: null,
    proposal: null,
    lockId: null,
    attestations: [],
    balances: {},
    deliveredContent: null,
    requiredEvidence: [],
    log: [],
    error: null,
  };
}

export function appendLog(state: ConsoleState, text: string): void {
  state.log.push({ at: new Date().toISOString(), text });
}
