// Browser entry point: wires the purchase controller to the page. The demo
// key ships in the page itself; this console exists to exercise a local
// gateway, not to hold real funds.

import { GatewayClient } from "./api.js";
import { PurchaseController } from "./controller.js";
import { createSigner } from "./signing.js";
import { initialState } from "./state.js";
import {
  renderAttestations, renderBalances, renderCatalog, renderLog, renderPhase, renderProposal,
} from "./ui.js";

const DEFAULT_GATEWAY = "http://127.0.0.1:8402";
// demo-only seed, same buyer account the bundled scenarios use
const BUYER_ID = "buyer";
const BUYER_SEED = "0x1111111111111111111111111111111111111111111111111111111111111111";
const WATCHED_ACCOUNTS = ["buyer", "seller"];

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

async function main(): Promise<void> {
  const gatewayUrl =
    new URLSearchParams(location.search).get("gateway") ?? DEFAULT_GATEWAY;
  const state = initialState(gatewayUrl, BUYER_ID);
  const client = new GatewayClient(gatewayUrl);
  const signer = await createSigner(BUYER_ID, BUYER_SEED);

  const render = () => {
    byId("catalog").innerHTML = renderCatalog(state.catalog);
    byId("phase").innerHTML = renderPhase(state);
    byId("proposal").innerHTML = renderProposal(state.proposal);
    byId("attestations").innerHTML = renderAttestations(state.attestations);
    byId("balances").innerHTML = renderBalances(state.balances);
    byId("log").innerHTML = renderLog(state);
    const needsEvidence = state.phase === "locked";
    byId("evidence-form").style.display = needsEvidence ? "block" : "none";
    byId<HTMLButtonElement>("accept").disabled = state.phase !== "pending";
  };

  const controller = new PurchaseController(client, signer, state, render);
  const refresh = () => controller.refreshBalances(WATCHED_ACCOUNTS);

  byId("gateway-url").textContent = gatewayUrl;
  byId("buyer-key").textContent = `${BUYER_ID} (${signer.publicKeyHex.slice(0, 18)}…)`;

  byId("catalog").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    const itemId = target.dataset["item"];
    if (!itemId) {
      return;
    }
    await controller.requestItem(itemId);
    await controller.payChallenge();
    await refresh();
  });

  byId("accept").addEventListener("click", async () => {
    await controller.acceptProposal();
    await controller.payTranches();
    await refresh();
  });

  byId("evidence-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const source = byId<HTMLInputElement>("evidence-source").value;
    const amount = byId<HTMLInputElement>("evidence-amount").value;
    await controller.submitEvidence({ declaredSource: source, coveringAmount: amount });
    await refresh();
  });

  try {
    await controller.loadCatalog();
    await refresh();
  } catch (err) {
    byId("phase").innerHTML =
      `<span class="error">cannot reach gateway at ${gatewayUrl}: ${String(err)}</span>`;
  }
  render();
}

document.addEventListener("DOMContentLoaded", () => {
  void main();
});
