// Ed25519 signing through WebCrypto. The demo accounts are raw 32-byte
// seeds; WebCrypto only imports pkcs8, so we wrap the seed in the fixed
// RFC 8410 private-key envelope before importKey.

import { fromHex, toHex } from "./encoding.js";

// ASN.1 prefix for an Ed25519 PrivateKeyInfo carrying a 32-byte seed.
const PKCS8_PREFIX = fromHex("0x302e020100300506032b657004220420");

export interface Signer {
  accountId: string;
  publicKeyHex: string;
  sign(message: Uint8Array): Promise<Uint8Array>;
}

function seedToPkcs8(seed: Uint8Array): Uint8Array {
  const out = new Uint8Array(PKCS8_PREFIX.length + seed.length);
  out.set(PKCS8_PREFIX, 0);
  out.set(seed, PKCS8_PREFIX.length);
  return out;
}

export async function createSigner(accountId: string, seedHex: string): Promise<Signer> {
  const seed = fromHex(seedHex, 32);
  const privateKey = await crypto.subtle.importKey(
    "pkcs8", seedToPkcs8(seed) as BufferSource, { name: "Ed25519" }, false, ["sign"],
  );
  // WebCrypto has no seed-to-public derivation, but JWK export of a signing
  // key is also unavailable on a non-extractable key. Re-import extractable
  // just to read the public half out of the JWK "x" field.
  const probe = await crypto.subtle.importKey(
    "pkcs8", seedToPkcs8(seed) as BufferSource, { name: "Ed25519" }, true, ["sign"],
  );
  const jwk = await crypto.subtle.exportKey("jwk", probe);
  const publicKeyHex = toHex(base64UrlDecode(jwk.x ?? ""));
  return {
    accountId,
    publicKeyHex,
    async sign(message: Uint8Array): Promise<Uint8Array> {
      const sig = await crypto.subtle.sign({ name: "Ed25519" }, privateKey, message as BufferSource);
      return new Uint8Array(sig);
    },
  };
}

export async function verifySignature(
  publicKeyHex: string, message: Uint8Array, signature: Uint8Array,
): Promise<boolean> {
  const raw = fromHex(publicKeyHex, 32);
  const key = await crypto.subtle.importKey(
    "raw", raw as BufferSource, { name: "Ed25519" }, false, ["verify"],
  );
  return crypto.subtle.verify(
    { name: "Ed25519" }, key, signature as BufferSource, message as BufferSource,
  );
}

function base64UrlDecode(text: string): Uint8Array {
  const b64 = text.replace(/-/g, "+").replace(/_/g, "/");
  const padded = b64 + "=".repeat((4 - (b64.length % 4)) % 4);
  const binary = atob(padded);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    out[i] = binary.charCodeAt(i);
  }
  return out;
}
