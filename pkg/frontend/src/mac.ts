/** Shared-secret login: HMAC-SHA256(secret, nonce || channel-kind byte). */

export const CHANNEL_RFB = 0x01;
export const CHANNEL_CMD = 0x02;

export async function computeMac(
  secret: Uint8Array,
  nonce: Uint8Array,
  channelKind: number,
): Promise<Uint8Array> {
  const key = await crypto.subtle.importKey(
    "raw",
    secret as BufferSource,
    { name: "HMAC", hash: "SHA-256" },
    false,
    ["sign"],
  );
  const message = new Uint8Array(nonce.length + 1);
  message.set(nonce, 0);
  message[nonce.length] = channelKind;
  const mac = await crypto.subtle.sign("HMAC", key, message as BufferSource);
  return new Uint8Array(mac);
}

export function encodeSecret(secret: string): Uint8Array {
  return new TextEncoder().encode(secret);
}
