import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  ConsoleApp,
  COPY_BUTTON_LABEL,
  CREATE_BUTTON_LABEL,
  DOWNLOAD_HEADING,
  FORM_QUESTIONS,
  LANDING_ACTIONS,
} from "../src/console.js";
import { FakeBackend } from "./fake_backend.js";

let backend: FakeBackend;
let root: HTMLElement;
let clipboardWrites: string[];
let openedTabs: string[];
let savedFiles: Array<{ blob: Blob; filename: string }>;
let storageMap: Map<string, string>;

beforeEach(() => {
  backend = new FakeBackend();
  vi.stubGlobal("fetch", backend.fetch);
  document.body.innerHTML = `<div id="console-root"></div>`;
  root = document.getElementById("console-root")!;
  clipboardWrites = [];
  openedTabs = [];
  savedFiles = [];
  storageMap = new Map();
});

const flush = (): Promise<void> => new Promise((resolve) => setTimeout(resolve, 0));

function newApp(): ConsoleApp {
  return new ConsoleApp(root, new ApiClient(), {
    clipboard: {
      writeText: (text: string) => {
        clipboardWrites.push(text);
        return Promise.resolve();
      },
    },
    openTab: (url: string) => void openedTabs.push(url),
    saveFile: (blob: Blob, filename: string) => void savedFiles.push({ blob, filename }),
    storage: {
      getItem: (key: string) => storageMap.get(key) ?? null,
      setItem: (key: string, value: string) => void storageMap.set(key, value),
      removeItem: (key: string) => void storageMap.delete(key),
    },
  });
}

/** Seed an account, issue a token, and leave it in storage as a sign-in would. */
function signedInApp(): { app: ConsoleApp; researcherId: string } {
  const account = backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
  const token = backend.issueToken(account.researcher_id);
  storageMap.set("g4r_token", token);
  storageMap.set("g4r_researcher_name", account.name);
  return { app: newApp(), researcherId: account.researcher_id };
}

function questionItems(): HTMLElement[] {
  return Array.from(root.querySelectorAll<HTMLElement>(".g4r-question"));
}

function setField(name: string, value: string): void {
  root.querySelector<HTMLInputElement | HTMLTextAreaElement>(`[name="${name}"]`)!.value = value;
}

async function submitCreateForm(): Promise<void> {
  root
    .querySelector<HTMLFormElement>("form.g4r-create")!
    .dispatchEvent(new Event("submit", { cancelable: true }));
  await flush();
}

describe("landing page", () => {
  it("offers exactly the three entry actions", async () => {
    await newApp().navigate("#/");
    const labels = Array.from(root.querySelectorAll(".g4r-action")).map(
      (button) => button.textContent,
    );
    expect(labels).toEqual([...LANDING_ACTIONS]);
    expect(labels).toEqual(["Create a GPT Interface", "Sign in", "Create an account"]);
  });

  it("routes the first action to the creation form", async () => {
    const app = newApp();
    await app.navigate("#/");
    root.querySelector<HTMLButtonElement>(`.g4r-action[data-action="0"]`)!.click();
    await flush();
    expect(root.textContent).toContain("Create a New GPT Interface");
  });
});

describe("creation form", () => {
  it("shows 11 questions to guests, hiding the study name", async () => {
    await newApp().navigate("#/create");
    expect(questionItems()).toHaveLength(11);
    expect(root.querySelector(`[name="study_name"]`)).toBeNull();
    expect(root.textContent).toContain("as a guest");
  });

  it("shows all 12 questions to signed-in researchers, study name first", async () => {
    const { app } = signedInApp();
    await app.navigate("#/create");
    const items = questionItems();
    expect(items).toHaveLength(12);
    expect(items[0]!.textContent).toContain(FORM_QUESTIONS[0]);
    expect(root.querySelector(`[name="study_name"]`)).not.toBeNull();
  });

  it("prefills every default fetched from the server", async () => {
    await newApp().navigate("#/create");
    const field = (name: string): HTMLInputElement | HTMLTextAreaElement =>
      root.querySelector(`[name="${name}"]`)!;
    expect((field("max_messages") as HTMLInputElement).value).toBe("20");
    expect(field("participant_label").value).toBe("You");
    expect(field("gpt_label").value).toBe("ChatGPT");
    expect(field("first_message").value).toBe("What can I help with?");
    expect(field("temperature").value).toBe("1.0");
    expect(root.querySelector<HTMLInputElement>(`input[value="new_tab"]`)!.checked).toBe(true);
    expect(root.querySelector<HTMLButtonElement>(".g4r-submit")!.textContent).toBe(
      CREATE_BUTTON_LABEL,
    );
  });

  it("shows server validation errors inline at the offending field", async () => {
    await newApp().navigate("#/create");
    setField("temperature", "9");
    await submitCreateForm();
    expect(
      root.querySelector(`[data-error-for="temperature"]`)!.textContent,
    ).toBe("temperature must be between 0.0 and 2.0 (inclusive)");
    // Still on the form; nothing was created.
    expect(root.querySelector("form.g4r-create")).not.toBeNull();
    expect(backend.interfaces.size).toBe(0);
  });

  it("requires a study name from signed-in researchers", async () => {
    const { app } = signedInApp();
    await app.navigate("#/create");
    await submitCreateForm();
    expect(root.querySelector(`[data-error-for="study_name"]`)!.textContent).toBe(
      "study name is required",
    );
  });

  it("toggles the explanation when [What is this?] is clicked", async () => {
    await newApp().navigate("#/create");
    const link = root.querySelector<HTMLAnchorElement>(`[data-help="temperature"]`)!;
    const help = root.querySelector<HTMLElement>(`[data-help-for="temperature"]`)!;
    expect(help.hidden).toBe(true);
    link.click();
    expect(help.hidden).toBe(false);
  });
});

describe("confirmation page", () => {
  async function createAsGuest(): Promise<void> {
    const app = newApp();
    await app.navigate("#/create");
    await submitCreateForm();
  }

  it("confirms all the effective values after a default creation", async () => {
    await createAsGuest();
    const text = root.textContent!;
    expect(text).toContain("Your GPT Interface Has Been Created");
    expect(text).toContain("guest-"); // auto-assigned study name
    expect(text).toContain("In a new browser tab");
    expect(text).toContain("You");
    expect(text).toContain("ChatGPT");
    expect(text).toContain("What can I help with?");
    expect(text).toContain("1.0");
    expect(text).toContain("(none)"); // optional fields left empty
  });

  it("copies the byte-exact snippet to the clipboard", async () => {
    await createAsGuest();
    const record = [...backend.interfaces.values()][0]!;
    const button = root.querySelector<HTMLButtonElement>(".g4r-copy")!;
    expect(button.textContent).toBe(COPY_BUTTON_LABEL);
    expect(button.textContent).toBe("Click to copy this code");

    button.click();
    await flush();

    expect(clipboardWrites).toEqual([backend.snippetText(record)]);
    expect(root.querySelector("pre.g4r-snippet code")!.textContent).toBe(
      backend.snippetText(record),
    );
    expect(button.textContent).toBe("Copied!");
  });

  it("names the survey field g4r_pid in the embedding instructions", async () => {
    await createAsGuest();
    expect(root.querySelector(".g4r-next-steps")!.textContent).toContain("g4r_pid");
  });

  it("previews the interface in a new tab with a fresh participant id", async () => {
    await createAsGuest();
    const record = [...backend.interfaces.values()][0]!;
    root.querySelector<HTMLButtonElement>(".g4r-preview")!.click();
    expect(openedTabs).toHaveLength(1);
    const url = openedTabs[0]!;
    expect(url).toMatch(
      new RegExp(`^http://fake\\.test/embed/${record.interface_id}\\?pid=[A-Za-z0-9]{16}$`),
    );
  });

  it("masks a supplied API key in the confirmation details", async () => {
    const app = newApp();
    await app.navigate("#/create");
    setField("api_key", "sk-very-secret-key");
    await submitCreateForm();
    expect(root.textContent).toContain("********");
    expect(root.textContent).not.toContain("sk-very-secret-key");
  });

  it("falls back to the form when visited with nothing created", async () => {
    await newApp().navigate("#/confirmation");
    await flush();
    expect(root.querySelector("form.g4r-create")).not.toBeNull();
  });
});

describe("sign in", () => {
  it("shows the indistinguishable failure message on bad credentials", async () => {
    backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const app = newApp();
    await app.navigate("#/signin");
    setField("email", "dana@example.edu");
    setField("password", "wrong-password");
    root
      .querySelector<HTMLFormElement>("form.g4r-signin")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await flush();
    expect(root.querySelector(".g4r-form-error")!.textContent).toBe("invalid email or password");
  });

  it("lands on Researcher Home and persists the token", async () => {
    backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const app = newApp();
    await app.navigate("#/signin");
    setField("email", "dana@example.edu");
    setField("password", "correct-horse");
    root
      .querySelector<HTMLFormElement>("form.g4r-signin")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await flush();
    expect(root.textContent).toContain("Researcher Home");
    expect(storageMap.get("g4r_token")).toMatch(/^tok-/);
  });
});

describe("account creation", () => {
  it("creates the account, signs in, and offers the home button", async () => {
    const app = newApp();
    await app.navigate("#/account");
    expect(root.textContent).toContain("salted hash");
    setField("name", "Dana");
    setField("email", "dana@example.edu");
    setField("password", "correct-horse");
    root
      .querySelector<HTMLFormElement>("form.g4r-account")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await flush();

    expect(root.textContent).toContain("Your Account Has Been Created");
    root.querySelector<HTMLButtonElement>(".g4r-to-home")!.click();
    await flush();
    expect(root.textContent).toContain(DOWNLOAD_HEADING);
  });

  it("surfaces a duplicate-email rejection", async () => {
    backend.seedAccount("Dana", "dana@example.edu", "correct-horse");
    const app = newApp();
    await app.navigate("#/account");
    setField("name", "Dana Again");
    setField("email", "dana@example.edu");
    setField("password", "another-pass");
    root
      .querySelector<HTMLFormElement>("form.g4r-account")!
      .dispatchEvent(new Event("submit", { cancelable: true }));
    await flush();
    expect(root.querySelector(".g4r-form-error")!.textContent).toContain("already exists");
  });
});

describe("researcher home", () => {
  it("lists one download row per owned interface, newest first", async () => {
    const { app, researcherId } = signedInApp();
    backend.seedInterface({
      owner_id: researcherId,
      study_name: "older study",
      created_at: "2026-08-01T10:00:00.000Z",
    });
    backend.seedInterface({
      owner_id: researcherId,
      study_name: "newer study",
      created_at: "2026-08-15T10:00:00.000Z",
    });
    backend.seedInterface({ study_name: "someone else's" }); // unowned, must not appear

    await app.navigate("#/home");
    expect(root.querySelector("h3")!.textContent).toBe(DOWNLOAD_HEADING);
    expect(root.querySelector("h3")!.textContent).toBe("Download G4R Messages Data");

    const rows = Array.from(root.querySelectorAll("tbody tr")).map((row) => row.textContent!);
    expect(rows).toHaveLength(2);
    expect(rows[0]).toContain("newer study");
    expect(rows[0]).toContain("2026-08-15");
    expect(rows[1]).toContain("older study");
    expect(root.textContent).not.toContain("someone else's");
  });

  it("downloads a transcript with the auth header and saves it under the export name", async () => {
    const { app, researcherId } = signedInApp();
    const record = backend.seedInterface({ owner_id: researcherId, max_messages: 5 });
    const participant = new ApiClient();
    const session = await participant.openSession(record.interface_id, "PIDDOWNLOAD00001");
    await participant.sendMessage(session.session_id, "hello there");

    await app.navigate("#/home");
    root.querySelector<HTMLAnchorElement>(".g4r-download")!.click();
    await flush();

    expect(savedFiles).toHaveLength(1);
    expect(savedFiles[0]!.filename).toBe("g4r_messages.csv");
    const content = await savedFiles[0]!.blob.text();
    expect(content).toContain("participant_id,message_to_gpt,message_from_gpt,timestamp");
    expect(content).toContain("PIDDOWNLOAD00001,hello there");
  });

  it("guides a new researcher with an empty table and links the sample files", async () => {
    const { app } = signedInApp();
    await app.navigate("#/home");
    expect(root.textContent).toContain("You have not created any GPT Interfaces yet");
    const hrefs = Array.from(
      root.querySelectorAll<HTMLAnchorElement>(".g4r-samples a"),
    ).map((a) => a.getAttribute("href"));
    expect(hrefs).toEqual([
      "/samples/sample_messages.csv",
      "/samples/sample_survey.csv",
      "/samples/sample_merged.csv",
    ]);
  });

  it("redirects to sign-in and clears the stale token when the session expired", async () => {
    storageMap.set("g4r_token", "tok-stale-and-unknown");
    const app = newApp();
    await app.navigate("#/home");
    await flush();
    expect(root.querySelector("form.g4r-signin")).not.toBeNull();
    expect(storageMap.has("g4r_token")).toBe(false);
  });

  it("redirects straight to sign-in when no one is signed in", async () => {
    await newApp().navigate("#/home");
    await flush();
    expect(root.querySelector("form.g4r-signin")).not.toBeNull();
  });

  it("signs out back to the landing page", async () => {
    const { app } = signedInApp();
    await app.navigate("#/home");
    root.querySelector<HTMLAnchorElement>(".g4r-signout")!.click();
    await flush();
    expect(storageMap.has("g4r_token")).toBe(false);
    expect(root.textContent).toContain("Create a GPT Interface");
  });
});
