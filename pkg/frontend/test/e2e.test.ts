// End-to-end: boot the real gateway as a subprocess and walk the console's
// purchase controller through the large-purchase flow over plain HTTP:
// challenge, pending verdict, tranche plan, escrow, evidence, release,
// delivery. Everything the browser would do, minus the DOM.

import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { createServer } from "node:net";
import type { AddressInfo } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, test } from "vitest";

import { GatewayClient, GatewayError } from "../src/api.js";
import { PurchaseController } from "../src/controller.js";
import { authorizationToWire, canonicalEncode, fromHex, randomNonce, toHex } from "../src/encoding.js";
import { createSigner } from "../src/signing.js";
import type { Signer } from "../src/signing.js";
import { initialState } from "../src/state.js";
import type { ConsoleState } from "../src/state.js";
import { renderAttestations, renderPhase } from "../src/ui.js";

const ITEM = "model-weights-large";
const BOOT_TIMEOUT = 30_000;

const keys = JSON.parse(
  readFileSync(new URL("../fixtures/keys.json", import.meta.url), "utf-8"),
) as { accounts: Record<string, string> };

let proc: ChildProcess;
let base: string;
let client: GatewayClient;
let signer: Signer;
let state: ConsoleState;
let controller: PurchaseController;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const port = (probe.address() as AddressInfo).port;
      probe.close(() => resolve(port));
    });
  });
}

async function waitForBoot(): Promise<void> {
  const deadline = Date.now() + BOOT_TIMEOUT;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${base}/catalog`);
      if (response.ok) {
        return;
      }
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("gateway did not come up in time");
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  const scratch = mkdtempSync(join(tmpdir(), "console-e2e-"));
  proc = spawn(
    "python3",
    ["-m", "complipay", "--mode", "serve", "--scenario", "scenario2",
     "--listen", `127.0.0.1:${port}`],
    { cwd: scratch, stdio: ["ignore", "pipe", "pipe"] },
  );
  proc.stderr?.on("data", () => {});
  await waitForBoot();
  client = new GatewayClient(base);
  signer = await createSigner("buyer", keys.accounts["buyer"]);
  state = initialState(base, "buyer");
  controller = new PurchaseController(client, signer, state);
}, BOOT_TIMEOUT + 5_000);

afterAll(async () => {
  if (proc && proc.exitCode === null) {
    proc.kill("SIGTERM");
    await new Promise((resolve) => proc.once("exit", resolve));
  }
});

describe("large purchase through the live gateway", () => {
  test("catalog lists the item and the split threshold", async () => {
    await controller.loadCatalog();
    expect(state.catalog?.sof_threshold).toBe("10000");
    const item = state.catalog?.items.find((i) => i.item_id === ITEM);
    expect(item?.price).toBe("15000");
  });

  test("402 challenge carries the payment requirements", async () => {
    await controller.requestItem(ITEM);
    expect(state.phase).toBe("challenged");
    expect(state.requirements?.amount).toBe("15000");
    expect(state.requirements?.payee).toBe("seller");
    expect(state.requirements?.pay_to).toBe("/pay");
  });

  test("full payment goes pending with a two-tranche proposal", async () => {
    await controller.payChallenge();
    expect(state.phase).toBe("pending");
    expect(state.requiredEvidence).toEqual(["source-of-funds"]);
    const amounts = state.proposal?.tranches.map((t) => t.amount);
    expect(amounts).toEqual(["10000", "5000"]);
    expect(state.attestations.map((a) => a.aggregate.overall)).toEqual(["PENDING"]);
  });

  test("no funds moved while blocked", async () => {
    await controller.refreshBalances(["buyer", "seller"]);
    expect(state.balances["buyer"]).toBe("20000");
    expect(state.balances["seller"]).toBe("0");
  });

  test("accepting the proposal opens the tranche path", async () => {
    await controller.acceptProposal();
    expect(state.phase).toBe("accepted");
    expect(state.proposal?.accepted).toBe(true);
  });

  test("tranche 1 settles direct, tranche 2 locks in escrow", async () => {
    await controller.payTranches();
    expect(state.phase).toBe("locked");
    expect(state.lockId).toBeTruthy();
    const lock = await client.lock(state.lockId!);
    expect(lock.state).toBe("LOCKED");
    expect(lock.amount).toBe("5000");
    expect(lock.condition_id).toBe("source-of-funds");
    await controller.refreshBalances(["buyer", "seller"]);
    expect(state.balances["buyer"]).toBe("5000");
    expect(state.balances["seller"]).toBe("10000");
  });

  test("evidence releases the escrow and the item is delivered", async () => {
    await controller.submitEvidence({
      declaredSource: "invoice-2026-0117 settled via payroll account",
      coveringAmount: "15000",
    });
    expect(state.phase).toBe("delivered");
    expect(state.deliveredContent).toBe(`contents of ${ITEM}`);
    const lock = await client.lock(state.lockId!);
    expect(lock.state).toBe("RELEASED");
    await controller.refreshBalances(["buyer", "seller"]);
    expect(state.balances["buyer"]).toBe("5000");
    expect(state.balances["seller"]).toBe("15000");
  });

  test("attestation chain tells the whole story in order", async () => {
    const verdicts = state.attestations.map((a) => a.aggregate.overall);
    expect(verdicts).toEqual(["PENDING", "PASS", "PASS"]);
    expect(state.attestations[0].prev_hash).toBe("0".repeat(64));
    for (let i = 1; i < state.attestations.length; i++) {
      expect(state.attestations[i].prev_hash).toBe(state.attestations[i - 1].hash);
    }
  });

  test("gateway transcript shows the canonical event order", async () => {
    const transcript = await client.transcript();
    expect(transcript.events.map((e) => e.kind)).toEqual([
      "challenge_issued",
      "payment_submitted",
      "payment_pending",
      "proposal_issued",
      "proposal_accepted",
      "payment_submitted",
      "tranche_settled",
      "payment_submitted",
      "escrow_locked",
      "evidence_submitted",
      "escrow_released",
    ]);
  });

  test("render functions reflect the live state", () => {
    const phaseHtml = renderPhase(state);
    expect(phaseHtml).toContain("phase-delivered");
    expect(phaseHtml).toContain(`contents of ${ITEM}`);
    const attHtml = renderAttestations(state.attestations);
    expect(attHtml).toContain("verdict-PENDING");
    expect(attHtml).toContain("verdict-PASS");
  });
});

describe("gateway error surface", () => {
  test("unknown item is a 404 with a stable code", async () => {
    await expect(client.requestResource("no-such-item")).rejects.toMatchObject({
      status: 404,
      code: "UNKNOWN_ITEM",
    });
  });

  test("a bad signature is rejected with 401 and leaves no attestation", async () => {
    const challenge = await client.requestResource(ITEM);
    if (challenge.status !== "payment_required") {
      throw new Error("expected a fresh challenge");
    }
    const req = challenge.requirements;
    const auth = {
      payer: "buyer",
      payee: req.payee,
      amount: BigInt(req.amount),
      validAfter: req.issued_at - 1,
      validBefore: req.issued_at + 300,
      nonce: randomNonce(),
    };
    const signature = await signer.sign(canonicalEncode(auth));
    signature[0] ^= 0xff;
    const attempt = client.pay({
      tx_id: req.tx_id,
      authorization: authorizationToWire(auth),
      signature: toHex(signature),
    });
    await expect(attempt).rejects.toMatchObject({ status: 401, code: "BAD_SIGNATURE" });
    const attestations = await client.attestations(req.tx_id);
    expect(attestations.attestations).toEqual([]);
  });

  test("malformed authorization is a 422 schema violation", async () => {
    const attempt = client.pay({
      tx_id: "tx-000001",
      authorization: { payer: "buyer" },
      signature: toHex(fromHex("0x00".padEnd(130, "0"), 64)),
    });
    await expect(attempt).rejects.toMatchObject({ status: 422, code: "SCHEMA_VIOLATION" });
  });
});
