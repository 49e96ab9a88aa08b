import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  ApiClient,
  ApiError,
  CAP_MESSAGE,
  CapError,
  UpstreamError,
  ValidationError,
} from "../src/api.js";
import { FakeBackend } from "./fake_backend.js";

let backend: FakeBackend;

beforeEach(() => {
  backend = new FakeBackend();
  vi.stubGlobal("fetch", backend.fetch);
});

describe("authorization header", () => {
  it("is absent for anonymous clients", async () => {
    const client = new ApiClient();
    await client.defaults();
    expect(backend.requests[0]!.headers["authorization"]).toBeUndefined();
  });

  it("carries the bearer token once signed in", async () => {
    backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const client = new ApiClient();
    await client.signIn("dana@example.edu", "correct-horse");
    await client.listInterfaces();
    const last = backend.requests[backend.requests.length - 1]!;
    expect(last.headers["authorization"]).toMatch(/^Bearer tok-/);
  });
});

describe("error mapping", () => {
  it("signals the message cap with the exact plain-text body", async () => {
    const record = backend.seedInterface({ max_messages: 0 });
    const client = new ApiClient();
    const session = await client.openSession(record.interface_id, "PID0000000000001");
    const failure = await client.sendMessage(session.session_id, "hello").catch((e) => e);
    expect(failure).toBeInstanceOf(CapError);
    expect(failure.message).toBe(CAP_MESSAGE);
    expect(failure.message).toBe("You have sent the maximum allowed messages");
  });

  it("maps 502 to an upstream failure that consumed no quota", async () => {
    const record = backend.seedInterface({ max_messages: 3 });
    const client = new ApiClient();
    const session = await client.openSession(record.interface_id, "PID0000000000002");
    backend.failNextSend = true;
    const failure = await client.sendMessage(session.session_id, "hello").catch((e) => e);
    expect(failure).toBeInstanceOf(UpstreamError);
    const reopened = await client.openSession(record.interface_id, "PID0000000000002");
    expect(reopened.remaining).toBe(3);
    expect(reopened.history).toHaveLength(0);
  });

  it("parses field-level validation errors", async () => {
    const client = new ApiClient();
    const failure = await client.createInterface({ temperature: "9" }).catch((e) => e);
    expect(failure).toBeInstanceOf(ValidationError);
    expect(failure.errors).toEqual([
      {
        field: "temperature",
        code: "TemperatureOutOfRange",
        message: "temperature must be between 0.0 and 2.0 (inclusive)",
      },
    ]);
  });

  it("surfaces the indistinguishable sign-in failure message", async () => {
    backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const client = new ApiClient();
    const unknownEmail = await client.signIn("other@example.edu", "whatever-pass").catch((e) => e);
    const wrongPassword = await client.signIn("dana@example.edu", "wrong-password").catch((e) => e);
    expect(unknownEmail).toBeInstanceOf(ApiError);
    expect(unknownEmail.status).toBe(401);
    expect(unknownEmail.message).toBe(wrongPassword.message);
  });
});

describe("session flow", () => {
  it("round-trips a message and decrements remaining", async () => {
    const record = backend.seedInterface({ max_messages: 2, prepend_text: "Be brief" });
    const client = new ApiClient();
    const session = await client.openSession(record.interface_id, "PID0000000000003");
    expect(session.remaining).toBe(2);
    const result = await client.sendMessage(session.session_id, "What is G4R?");
    expect(result.remaining).toBe(1);
    // The fake echoes the wrapped upstream text, proving the prepend text is
    // applied server-side, while the captured participant message stays raw.
    expect(result.reply).toBe("echo: Be brief\nWhat is G4R?");
    expect(backend.exchangesFor(record.interface_id)[0]!.participant_message).toBe("What is G4R?");
  });

  it("downloads CSV only with the owner's token", async () => {
    const account = backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const record = backend.seedInterface({ owner_id: account.researcher_id });
    const anonymous = new ApiClient();
    const denied = await anonymous.downloadCsv(record.interface_id).catch((e) => e);
    expect(denied).toBeInstanceOf(ApiError);
    expect(denied.status).toBe(401);

    const owner = new ApiClient();
    await owner.signIn("dana@example.edu", "correct-horse");
    const blob = await owner.downloadCsv(record.interface_id);
    expect(await blob.text()).toContain("participant_id,message_to_gpt,message_from_gpt,timestamp");
  });
});
