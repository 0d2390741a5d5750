// Thin fetch client for the settlement gateway. Every method returns the
// parsed JSON body; non-2xx responses with the gateway's {"error": ...}
// envelope become GatewayError so callers can branch on the error code.

export interface CatalogItem {
  item_id: string;
  price: string;
}

export interface Catalog {
  items: CatalogItem[];
  payee: string;
  sof_threshold: string;
}

export interface PaymentRequirements {
  scheme: string;
  tx_id: string;
  item_id: string;
  amount: string;
  payee: string;
  pay_to: string;
  issued_at: number;
  expires_at: number;
}

export type ResourceResponse =
  | { status: "payment_required"; requirements: PaymentRequirements }
  | { status: "delivered"; item_id: string; tx_id: string; content: string };

export interface Tranche {
  tranche: number;
  kind: "direct" | "escrow";
  amount: string;
  condition_id?: string;
  releaser?: string;
}

export interface Proposal {
  proposal_id: string;
  tx_id: string;
  tranches: Tranche[];
  accepted: boolean;
}

export interface Attestation {
  tx_id: string;
  round: number;
  instruction_digest: string;
  aggregate: {
    overall: "PASS" | "PENDING" | "FAIL";
    parts: { policy_id: string; value: string; reason: string; required_evidence?: string }[];
  };
  recorded_at: number;
  payer: string;
  payee: string;
  prev_hash: string;
  hash: string;
}

export interface Receipt {
  tx_id: string;
  kind: string;
  payer: string;
  payee: string;
  amount: string;
  ledger_seq: number;
}

export interface EscrowLock {
  lock_id: string;
  tx_id: string;
  payer: string;
  payee: string;
  amount: string;
  condition_id: string;
  releaser: string;
  state: string;
}

export interface PayResponse {
  outcome: "SETTLED" | "PENDING" | "FAILED";
  tx_id: string;
  tranche?: number;
  receipt?: Receipt;
  attestation: Attestation;
  required_evidence?: string[];
  proposal?: Proposal;
  lock?: EscrowLock;
}

export interface TranscriptEvent {
  seq: number;
  at: number;
  kind: string;
  payload: Record<string, unknown>;
  digest: string;
}

export interface CaseStatus {
  tx_id: string;
  state: string;
  item_id: string;
  amount: string;
  proposal?: Proposal;
  lock?: EscrowLock;
}

export interface PayRequest {
  tx_id: string;
  authorization: Record<string, unknown>;
  signature: string;
}

export class GatewayError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class GatewayClient {
  constructor(private readonly baseUrl: string) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    const data = await response.json();
    // 402 is the challenge handshake, not a failure
    if (!response.ok && response.status !== 402) {
      const err = (data as { error?: { code: string; message: string } }).error;
      if (err) {
        throw new GatewayError(response.status, err.code, err.message);
      }
      throw new GatewayError(response.status, "HTTP_ERROR", `unexpected status ${response.status}`);
    }
    return data;
  }

  catalog(): Promise<Catalog> {
    return this.request("GET", "/catalog") as Promise<Catalog>;
  }

  requestResource(itemId: string, txId?: string): Promise<ResourceResponse> {
    const query = txId ? `?tx_id=${encodeURIComponent(txId)}` : "";
    return this.request(
      "GET", `/resource/${encodeURIComponent(itemId)}${query}`,
    ) as Promise<ResourceResponse>;
  }

  pay(payRequest: PayRequest): Promise<PayResponse> {
    return this.request("POST", "/pay", payRequest) as Promise<PayResponse>;
  }

  acceptProposal(proposalId: string): Promise<{ accepted: boolean; proposal: Proposal }> {
    return this.request(
      "POST", `/proposals/${encodeURIComponent(proposalId)}/accept`,
    ) as Promise<{ accepted: boolean; proposal: Proposal }>;
  }

  submitEvidence(subject: string, declaredSource: string, coveringAmount: string):
      Promise<{ evidence: Record<string, unknown>; released: string[] }> {
    return this.request("POST", "/evidence", {
      subject, declared_source: declaredSource, covering_amount: coveringAmount,
    }) as Promise<{ evidence: Record<string, unknown>; released: string[] }>;
  }

  attestations(txId: string): Promise<{ tx_id: string; attestations: Attestation[] }> {
    return this.request(
      "GET", `/attestations/${encodeURIComponent(txId)}`,
    ) as Promise<{ tx_id: string; attestations: Attestation[] }>;
  }

  balance(accountId: string): Promise<{ account_id: string; balance: string }> {
    return this.request(
      "GET", `/accounts/${encodeURIComponent(accountId)}/balance`,
    ) as Promise<{ account_id: string; balance: string }>;
  }

  lock(lockId: string): Promise<EscrowLock> {
    return this.request("GET", `/escrow/${encodeURIComponent(lockId)}`) as Promise<EscrowLock>;
  }

  caseStatus(txId: string): Promise<CaseStatus> {
    return this.request("GET", `/payments/${encodeURIComponent(txId)}`) as Promise<CaseStatus>;
  }

  transcript(): Promise<{ events: TranscriptEvent[] }> {
    return this.request("GET", "/transcript") as Promise<{ events: TranscriptEvent[] }>;
  }
}
