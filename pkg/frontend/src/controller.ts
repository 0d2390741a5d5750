// Purchase flow driver. Walks a single item through the 402 handshake:
// request the resource, sign the authorization, and depending on the
// compliance outcome either finish immediately or run the tranche plan
// (accept proposal, pay both tranches, file source-of-funds evidence,
// wait for the escrow release) before fetching the content.

import { GatewayClient, GatewayError } from "./api.js";
import type { PaymentRequirements, PayResponse } from "./api.js";
import { authorizationToWire, canonicalEncode, randomNonce, toHex } from "./encoding.js";
import type { Authorization } from "./encoding.js";
import type { Signer } from "./signing.js";
import { appendLog } from "./state.js";
import type { ConsoleState } from "./state.js";

const AUTH_WINDOW_SECONDS = 300;

export interface EvidenceInput {
  declaredSource: string;
  coveringAmount: string;
}

export class PurchaseController {
  constructor(
    private readonly client: GatewayClient,
    private readonly signer: Signer,
    private readonly state: ConsoleState,
    private readonly onChange: () => void = () => {},
  ) {}

  private touch(text: string): void {
    appendLog(this.state, text);
    this.onChange();
  }

  async loadCatalog(): Promise<void> {
    this.state.catalog = await this.client.catalog();
    this.touch(`catalog: ${this.state.catalog.items.length} items, `
      + `threshold ${this.state.catalog.sof_threshold}`);
  }

  async refreshBalances(accounts: string[]): Promise<void> {
    for (const accountId of accounts) {
      const result = await this.client.balance(accountId);
      this.state.balances[accountId] = result.balance;
    }
    this.onChange();
  }

  async refreshAttestations(): Promise<void> {
    const txId = this.state.requirements?.tx_id;
    if (!txId) {
      return;
    }
    const result = await this.client.attestations(txId);
    this.state.attestations = result.attestations;
    this.onChange();
  }

  /** Step 1: ask for the item and capture the payment requirements. */
  async requestItem(itemId: string): Promise<void> {
    const result = await this.client.requestResource(itemId);
    if (result.status === "delivered") {
      this.state.phase = "delivered";
      this.state.deliveredContent = result.content;
      this.touch(`already delivered: ${itemId}`);
      return;
    }
    this.state.requirements = result.requirements;
    this.state.phase = "challenged";
    this.state.proposal = null;
    this.state.lockId = null;
    this.state.deliveredContent = null;
    this.state.requiredEvidence = [];
    this.state.error = null;
    this.touch(`402 challenge ${result.requirements.tx_id}: `
      + `${result.requirements.amount} to ${result.requirements.payee}`);
  }

  private async signAndPay(requirements: PaymentRequirements, amount: bigint): Promise<PayResponse> {
    const auth: Authorization = {
      payer: this.signer.accountId,
      payee: requirements.payee,
      amount,
      validAfter: requirements.issued_at - 1,
      validBefore: requirements.issued_at + AUTH_WINDOW_SECONDS,
      nonce: randomNonce(),
    };
    const signature = await this.signer.sign(canonicalEncode(auth));
    return this.client.pay({
      tx_id: requirements.tx_id,
      authorization: authorizationToWire(auth),
      signature: toHex(signature),
    });
  }

  /** Step 2: pay the full challenge amount and see what compliance says. */
  async payChallenge(): Promise<void> {
    const requirements = this.state.requirements;
    if (!requirements) {
      throw new Error("no active challenge");
    }
    try {
      const result = await this.signAndPay(requirements, BigInt(requirements.amount));
      if (result.outcome === "SETTLED") {
        this.touch(`settled at seq ${result.receipt?.ledger_seq}`);
        await this.fetchDelivery();
        return;
      }
      if (result.outcome === "FAILED") {
        this.state.phase = "failed";
        const reasons = result.attestation.aggregate.parts
          .filter((p) => p.value === "FAIL").map((p) => p.reason);
        this.touch(`rejected: ${reasons.join("; ")}`);
        return;
      }
      this.state.phase = "pending";
      this.state.proposal = result.proposal ?? null;
      this.state.requiredEvidence = result.required_evidence ?? [];
      this.touch(`pending, evidence needed: ${this.state.requiredEvidence.join(", ")}; `
        + `proposal ${result.proposal?.proposal_id}`);
    } catch (err) {
      this.fail(err);
    } finally {
      await this.refreshAttestations();
    }
  }

  /** Step 3 (pending path): accept the gateway's tranche split. */
  async acceptProposal(): Promise<void> {
    const proposal = this.state.proposal;
    if (!proposal) {
      throw new Error("no proposal to accept");
    }
    const result = await this.client.acceptProposal(proposal.proposal_id);
    this.state.proposal = result.proposal;
    this.state.phase = "accepted";
    const amounts = result.proposal.tranches.map((t) => t.amount).join(" + ");
    this.touch(`accepted ${proposal.proposal_id}: ${amounts}`);
  }

  /** Step 4: pay the direct tranche, then custody the rest in escrow. */
  async payTranches(): Promise<void> {
    const requirements = this.state.requirements;
    const proposal = this.state.proposal;
    if (!requirements || !proposal) {
      throw new Error("tranche plan is not ready");
    }
    const [first, second] = proposal.tranches;
    try {
      const t1 = await this.signAndPay(requirements, BigInt(first.amount));
      if (t1.outcome !== "SETTLED") {
        this.fail(new Error(`first tranche came back ${t1.outcome}`));
        return;
      }
      this.state.phase = "tranche1_settled";
      this.touch(`tranche 1 settled: ${first.amount}`);
      const t2 = await this.signAndPay(requirements, BigInt(second.amount));
      if (!t2.lock) {
        this.fail(new Error("second tranche did not come back locked"));
        return;
      }
      this.state.lockId = t2.lock.lock_id;
      this.state.phase = "locked";
      this.touch(`tranche 2 locked under ${t2.lock.lock_id} `
        + `(condition ${t2.lock.condition_id}, releaser ${t2.lock.releaser})`);
    } catch (err) {
      this.fail(err);
    } finally {
      await this.refreshAttestations();
    }
  }

  /** Step 5: file the evidence the pending verdict asked for. */
  async submitEvidence(input: EvidenceInput): Promise<void> {
    const result = await this.client.submitEvidence(
      this.signer.accountId, input.declaredSource, input.coveringAmount,
    );
    this.touch(`evidence ${result.evidence["evidence_id"]} filed`);
    if (this.state.lockId && result.released.includes(this.state.lockId)) {
      this.state.phase = "released";
      this.touch(`escrow ${this.state.lockId} released`);
      await this.fetchDelivery();
    } else {
      this.touch("lock not released yet; mediator re-checks on its next sweep");
    }
    await this.refreshAttestations();
  }

  /** Final step: redeem the settled challenge for the content. */
  async fetchDelivery(): Promise<void> {
    const requirements = this.state.requirements;
    if (!requirements) {
      throw new Error("no active challenge");
    }
    const result = await this.client.requestResource(requirements.item_id, requirements.tx_id);
    if (result.status === "delivered") {
      this.state.phase = "delivered";
      this.state.deliveredContent = result.content;
      this.touch(`delivered ${result.item_id}`);
    } else {
      this.touch("still payment_required");
    }
  }

  private fail(err: unknown): void {
    this.state.phase = "error";
    if (err instanceof GatewayError) {
      this.state.error = `${err.code}: ${err.message}`;
    } else {
      this.state.error = String(err instanceof Error ? err.message : err);
    }
    this.touch(`error: ${this.state.error}`);
  }
}
