// Byte-level mirror of the gateway's authorization encoding. The signature
// travels over these exact bytes, so any drift here produces BAD_SIGNATURE
// on the server side. Layout: domain tag, 4-byte BE length-prefixed payer
// and payee ids, amount as 16-byte BE, the two window timestamps as 8-byte
// BE, then the 32-byte nonce.

export const DOMAIN_TAG = "COMPLIPAY-AUTH-V1";
export const NONCE_LENGTH = 32;
export const MAX_AMOUNT = (1n << 128n) - 1n;

export interface Authorization {
  payer: string;
  payee: string;
  amount: bigint;
  validAfter: number;
  validBefore: number;
  nonce: Uint8Array;
}

export function toHex(bytes: Uint8Array): string {
  let out = "0x";
  for (const b of bytes) {
    out += b.toString(16).padStart(2, "0");
  }
  return out;
}

export function fromHex(text: string, length?: number): Uint8Array {
  if (!text.startsWith("0x")) {
    throw new Error(`hex string must start with 0x: ${text}`);
  }
  const body = text.slice(2);
  if (body.length % 2 !== 0 || !/^[0-9a-f]*$/.test(body)) {
    throw new Error(`not lowercase hex: ${text}`);
  }
  const bytes = new Uint8Array(body.length / 2);
  for (let i = 0; i < bytes.length; i++) {
    bytes[i] = parseInt(body.slice(i * 2, i * 2 + 2), 16);
  }
  if (length !== undefined && bytes.length !== length) {
    throw new Error(`expected ${length} bytes, got ${bytes.length}`);
  }
  return bytes;
}

function bigEndian(value: bigint, width: number): Uint8Array {
  const out = new Uint8Array(width);
  let v = value;
  for (let i = width - 1; i >= 0; i--) {
    out[i] = Number(v & 0xffn);
    v >>= 8n;
  }
  if (v !== 0n) {
    throw new Error(`value does not fit in ${width} bytes`);
  }
  return out;
}

export function canonicalEncode(auth: Authorization): Uint8Array {
  if (!auth.payer || !auth.payee) {
    throw new Error("payer and payee ids must be non-empty");
  }
  if (auth.amount <= 0n || auth.amount > MAX_AMOUNT) {
    throw new Error("amount out of range");
  }
  if (auth.nonce.length !== NONCE_LENGTH) {
    throw new Error(`nonce must be ${NONCE_LENGTH} bytes`);
  }
  const enc = new TextEncoder();
  const payer = enc.encode(auth.payer);
  const payee = enc.encode(auth.payee);
  const parts = [
    enc.encode(DOMAIN_TAG),
    bigEndian(BigInt(payer.length), 4),
    payer,
    bigEndian(BigInt(payee.length), 4),
    payee,
    bigEndian(auth.amount, 16),
    bigEndian(BigInt(auth.validAfter), 8),
    bigEndian(BigInt(auth.validBefore), 8),
    auth.nonce,
  ];
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}

/** Wire form the gateway's POST /pay expects: amounts as decimal strings,
 *  binary as 0x-hex, timestamps as plain integers. */
export function authorizationToWire(auth: Authorization): Record<string, unknown> {
  return {
    payer: auth.payer,
    payee: auth.payee,
    amount: auth.amount.toString(),
    valid_after: auth.validAfter,
    valid_before: auth.validBefore,
    nonce: toHex(auth.nonce),
  };
}

export function randomNonce(): Uint8Array {
  const nonce = new Uint8Array(NONCE_LENGTH);
  crypto.getRandomValues(nonce);
  return nonce;
}
