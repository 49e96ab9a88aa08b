/**
 * Participant-ID generation, matching the algorithm the survey snippet embeds:
 * 16 characters drawn uniformly from [A-Za-z0-9] via rejection sampling, so
 * console-made preview IDs are indistinguishable from survey-made ones.
 */

export const PARTICIPANT_ID_LENGTH = 16;

const ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

export function makeParticipantId(length: number = PARTICIPANT_ID_LENGTH): string {
  let pid = "";
  while (pid.length < length) {
    const bytes = new Uint8Array(length);
    crypto.getRandomValues(bytes);
    for (let i = 0; i < bytes.length && pid.length < length; i++) {
      const value = bytes[i]!;
      // 4 * 62 = 248 is the largest multiple of the alphabet size that fits
      // in a byte; anything above it would bias the tail characters.
      if (value < 4 * ALPHABET.length) {
        pid += ALPHABET[value % ALPHABET.length];
      }
    }
  }
  return pid;
}

export function isParticipantId(value: string): boolean {
  if (value.length !== PARTICIPANT_ID_LENGTH) {
    return false;
  }
  for (const ch of value) {
    if (!ALPHABET.includes(ch)) {
      return false;
    }
  }
  return true;
}
