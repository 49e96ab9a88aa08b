/**
 * Researcher console: a small hash-routed page covering the whole researcher
 * journey — landing, guest or signed-in interface creation, the confirmation
 * page with the copyable survey snippet, account creation, sign-in, and
 * Researcher Home with a download row per interface.
 *
 * All state that matters lives on the server; the console keeps only the
 * session token (persisted so a reload stays signed in) and the most recently
 * created interface (for the confirmation page).
 */

import {
  ApiClient,
  ApiError,
  ValidationError,
  type CreatedInterface,
  type InterfaceSummary,
  type ServerDefaults,
  type SnippetPayload,
} from "./api.js";
import { makeParticipantId } from "./pid.js";

const TOKEN_KEY = "g4r_token";
const NAME_KEY = "g4r_researcher_name";

export const LANDING_ACTIONS = ["Create a GPT Interface", "Sign in", "Create an account"] as const;
export const COPY_BUTTON_LABEL = "Click to copy this code";
export const DOWNLOAD_HEADING = "Download G4R Messages Data";
export const CREATE_BUTTON_LABEL = "Create this GPT Interface";

/** The twelve creation questions, in the order the form presents them. */
export const FORM_QUESTIONS = [
  "What is the name of your study? (Participants will not see the name.)",
  "How do you want participants to access the GPT interface?",
  "How many messages will each participant be able to send to GPT?",
  "What is the label for the participant in the GPT Interface?",
  "What is the label for the GPT in the GPT Interface?",
  "(Optional) If you would like to send a system message to GPT to set guidelines and/or" +
    " contexts for the conversation, enter it here",
  "(Optional) If you would like GPT to send the first message to initiate the conversation," +
    " enter it below. (You can delete the text below.)",
  "(Optional) If you would like to adjust the temperature parameter, enter a value below." +
    " Note that this value must be between 0.0 and 2.0 (inclusive), and the default value is 1.0.",
  "(Optional) If you would like a text to precede each message from participant to GPT," +
    " enter it here:",
  "(Optional) If you would like a text to follow each message from participant to GPT," +
    " enter it here:",
  "(Optional) If you want to use your own OpenAI API Key, please enter it here:",
  "(Optional) If you would like to customize the interface in the section above the" +
    " conversation, enter the HTML for the section here:",
] as const;

const HELP_TEXT: Record<string, string> = {
  system_prompt:
    "A system prompt is a hidden instruction sent to the model before the conversation. " +
    "Use it to set the tone, role, or constraints for every reply — participants never see it.",
  temperature:
    "Temperature controls how varied the model's replies are. Values near 0.0 give focused, " +
    "repeatable answers; values near 2.0 give more diverse, creative ones.",
};

function htmlEscape(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Injectable browser services so tests can observe side effects. */
export interface ConsoleServices {
  clipboard?: { writeText(text: string): Promise<void> };
  openTab?: (url: string) => void;
  saveFile?: (blob: Blob, filename: string) => void;
  storage?: Pick<Storage, "getItem" | "setItem" | "removeItem">;
}

interface TokenStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const memoryStore: TokenStore = (() => {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => void map.set(key, value),
    removeItem: (key) => void map.delete(key),
  };
})();

function defaultSaveFile(blob: Blob, filename: string): void {
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}

export class ConsoleApp {
  private clipboard: { writeText(text: string): Promise<void> };
  private openTab: (url: string) => void;
  private saveFile: (blob: Blob, filename: string) => void;
  private storage: TokenStore;

  private lastCreated: CreatedInterface | null = null;
  private lastSnippet: SnippetPayload | null = null;
  private currentRoute = "";

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
    services: ConsoleServices = {},
  ) {
    this.clipboard = services.clipboard ??
      (typeof navigator !== "undefined" && navigator.clipboard
        ? navigator.clipboard
        : { writeText: () => Promise.reject(new Error("clipboard unavailable")) });
    this.openTab = services.openTab ?? ((url) => void window.open(url, "_blank"));
    this.saveFile = services.saveFile ?? defaultSaveFile;
    this.storage =
      services.storage ??
      (typeof localStorage !== "undefined" ? localStorage : memoryStore);
    this.client.token = this.storage.getItem(TOKEN_KEY);
  }

  get signedIn(): boolean {
    return this.client.token !== null;
  }

  /** Wire the hash router and render the current route. */
  start(): void {
    window.addEventListener("hashchange", () => {
      // Programmatic navigation already rendered before updating the hash;
      // only render here when the user edited the hash themselves.
      const route = window.location.hash.replace(/^#/, "") || "/";
      if (route !== this.currentRoute) {
        void this.navigate(window.location.hash);
      }
    });
    void this.navigate(window.location.hash);
  }

  async navigate(hash: string): Promise<void> {
    const route = hash.replace(/^#/, "") || "/";
    this.currentRoute = route;
    switch (route) {
      case "/":
        this.renderLanding();
        return;
      case "/create":
        await this.renderCreateForm();
        return;
      case "/confirmation":
        this.renderConfirmation();
        return;
      case "/signin":
        this.renderSignIn();
        return;
      case "/account":
        this.renderCreateAccount();
        return;
      case "/home":
        await this.renderHome();
        return;
      default:
        this.renderLanding();
    }
  }

  private setHash(hash: string): void {
    if (typeof window !== "undefined" && window.location.hash !== hash) {
      window.location.hash = hash;
    }
  }

  private signOut(): void {
    this.client.token = null;
    this.storage.removeItem(TOKEN_KEY);
    this.storage.removeItem(NAME_KEY);
  }

  // ---------------------------------------------------------------- landing

  private renderLanding(): void {
    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        <p>Set up a customized chat interface for your study participants,
        capture every exchange, and download the transcripts joined to your
        survey data.</p>
      </header>
      <nav class="g4r-landing-actions">
        ${LANDING_ACTIONS.map(
          (label, index) =>
            `<button type="button" class="g4r-action" data-action="${index}">${htmlEscape(label)}</button>`,
        ).join("\n")}
      </nav>
    `;
    const targets = ["#/create", "#/signin", "#/account"];
    this.root.querySelectorAll<HTMLButtonElement>(".g4r-action").forEach((button) => {
      button.addEventListener("click", () => {
        const target = targets[Number(button.dataset.action)];
        if (target) {
          void this.navigate(target);
          this.setHash(target);
        }
      });
    });
  }

  // ------------------------------------------------------------ create form

  private async renderCreateForm(): Promise<void> {
    let defaults: ServerDefaults;
    try {
      defaults = await this.client.defaults();
    } catch {
      this.root.innerHTML = `<p class="g4r-error">The server could not be reached. Reload to try again.</p>`;
      return;
    }

    const guest = !this.signedIn;
    const question = (index: number, field: string, controlHtml: string, help?: string): string => {
      const label = FORM_QUESTIONS[index]!;
      const helpLink = help
        ? ` <a href="#" class="g4r-whatisthis" data-help="${help}">[What is this?]</a>`
        : "";
      return `
        <li class="g4r-question" data-field="${field}">
          <label>${htmlEscape(label)}${helpLink}</label>
          ${help ? `<p class="g4r-help" data-help-for="${help}" hidden>${htmlEscape(HELP_TEXT[help] ?? "")}</p>` : ""}
          ${controlHtml}
          <span class="g4r-field-error" data-error-for="${field}"></span>
        </li>
      `;
    };

    const items: string[] = [];
    if (!guest) {
      items.push(question(0, "study_name", `<input type="text" name="study_name" maxlength="${defaults.bounds.study_name_max_chars}">`));
    }
    items.push(
      question(
        1,
        "access_mode",
        `
        <label class="g4r-radio"><input type="radio" name="access_mode" value="new_tab"${defaults.access_mode === "new_tab" ? " checked" : ""}> In a new browser tab</label>
        <label class="g4r-radio"><input type="radio" name="access_mode" value="embedded"${defaults.access_mode === "embedded" ? " checked" : ""}> Embedded within Qualtrics</label>
      `,
      ),
    );
    items.push(question(2, "max_messages", `<input type="number" name="max_messages" min="0" max="${defaults.bounds.max_messages_ceiling}" value="${defaults.max_messages}">`));
    items.push(question(3, "participant_label", `<input type="text" name="participant_label" maxlength="${defaults.bounds.label_max_chars}" value="${htmlEscape(defaults.participant_label)}">`));
    items.push(question(4, "gpt_label", `<input type="text" name="gpt_label" maxlength="${defaults.bounds.label_max_chars}" value="${htmlEscape(defaults.gpt_label)}">`));
    items.push(question(5, "system_prompt", `<textarea name="system_prompt" rows="3"></textarea>`, "system_prompt"));
    items.push(question(6, "first_message", `<textarea name="first_message" rows="2">${htmlEscape(defaults.first_message)}</textarea>`));
    items.push(question(7, "temperature", `<input type="text" name="temperature" value="${htmlEscape(defaults.temperature)}">`, "temperature"));
    items.push(question(8, "prepend_text", `<textarea name="prepend_text" rows="2"></textarea>`));
    items.push(question(9, "append_text", `<textarea name="append_text" rows="2"></textarea>`));
    items.push(question(10, "api_key", `<input type="password" name="api_key" autocomplete="off">`));
    items.push(question(11, "top_html", `<textarea name="top_html" rows="3"></textarea>`));

    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        ${this.signedIn ? `<a href="#/home">Researcher Home</a>` : `<a href="#/">Go Back to G4R Home</a>`}
      </header>
      <h2>Create a New GPT Interface</h2>
      ${guest ? `<p class="g4r-guest-note">You are trying this out as a guest; the study-name question appears once you are signed in.</p>` : ""}
      <form class="g4r-create">
        <ol class="g4r-questions">
          ${items.join("\n")}
        </ol>
        <p class="g4r-form-error"></p>
        <button type="submit" class="g4r-submit">${CREATE_BUTTON_LABEL}</button>
      </form>
    `;

    this.root.querySelectorAll<HTMLAnchorElement>(".g4r-whatisthis").forEach((link) => {
      link.addEventListener("click", (event) => {
        event.preventDefault();
        const help = this.root.querySelector<HTMLElement>(`[data-help-for="${link.dataset.help}"]`);
        if (help) {
          help.hidden = !help.hidden;
        }
      });
    });

    const form = this.root.querySelector<HTMLFormElement>("form.g4r-create")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitCreateForm(form, guest);
    });
  }

  private async submitCreateForm(form: HTMLFormElement, guest: boolean): Promise<void> {
    const value = (name: string): string =>
      form.querySelector<HTMLInputElement | HTMLTextAreaElement>(`[name="${name}"]`)?.value ?? "";
    const radios = Array.from(
      form.querySelectorAll<HTMLInputElement>(`input[name="access_mode"]`),
    );
    const draft: Record<string, unknown> = {
      access_mode: radios.find((radio) => radio.checked)?.value ?? "new_tab",
      participant_label: value("participant_label"),
      gpt_label: value("gpt_label"),
      // Always sent: an emptied box means "no opening message", not "use the
      // default" — the prefilled default is already in the box.
      first_message: value("first_message"),
    };
    if (!guest) {
      draft.study_name = value("study_name");
    }
    if (value("max_messages") !== "") {
      draft.max_messages = Number(value("max_messages"));
    }
    if (value("temperature") !== "") {
      draft.temperature = value("temperature");
    }
    for (const field of ["system_prompt", "prepend_text", "append_text", "api_key", "top_html"]) {
      if (value(field) !== "") {
        draft[field] = value(field);
      }
    }

    form.querySelectorAll<HTMLElement>(".g4r-field-error").forEach((span) => {
      span.textContent = "";
    });
    const formError = form.querySelector<HTMLElement>(".g4r-form-error")!;
    formError.textContent = "";

    try {
      const created = await this.client.createInterface(draft);
      this.lastCreated = created;
      this.lastSnippet = await this.client.snippet(created.interface_id);
    } catch (error) {
      if (error instanceof ValidationError) {
        for (const fieldError of error.errors) {
          const span = form.querySelector<HTMLElement>(
            `[data-error-for="${fieldError.field}"]`,
          );
          if (span) {
            span.textContent = fieldError.message;
          } else {
            formError.textContent = fieldError.message;
          }
        }
      } else if (error instanceof ApiError) {
        formError.textContent = error.message;
      } else {
        formError.textContent = "The server could not be reached. Please try again.";
      }
      return;
    }
    void this.navigate("#/confirmation");
    this.setHash("#/confirmation");
  }

  // ----------------------------------------------------------- confirmation

  private renderConfirmation(): void {
    const created = this.lastCreated;
    const snippet = this.lastSnippet;
    if (!created || !snippet) {
      void this.navigate("#/create");
      this.setHash("#/create");
      return;
    }
    const config = created.config;
    const show = (key: string): string => {
      const raw = config[key];
      if (raw === null || raw === undefined || raw === "") {
        return "(none)";
      }
      return String(raw);
    };
    const accessMode =
      config["access_mode"] === "embedded" ? "Embedded within Qualtrics" : "In a new browser tab";

    const detailRows: Array<[string, string]> = [
      ["Study name", show("study_name")],
      ["Access mode", accessMode],
      ["Maximum number of messages", show("max_messages")],
      ["Label for the participant", show("participant_label")],
      ["Label for the GPT", show("gpt_label")],
      ["System prompt", show("system_prompt")],
      ["First message by GPT", show("first_message")],
      ["Temperature", show("temperature")],
      ["Text prepended to each message", show("prepend_text")],
      ["Text appended to each message", show("append_text")],
      ["OpenAI API key", show("api_key")],
      ["HTML for the top section", show("top_html")],
    ];

    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        ${this.signedIn ? `<a href="#/home">Go to Your Researcher Home</a>` : `<a href="#/">Go Back to G4R Home</a>`}
      </header>
      <h2>Your GPT Interface Has Been Created</h2>
      <dl class="g4r-details">
        ${detailRows
          .map(
            ([term, detail]) =>
              `<dt>${htmlEscape(term)}</dt><dd>${htmlEscape(detail)}</dd>`,
          )
          .join("\n")}
      </dl>
      <button type="button" class="g4r-preview">Preview the Interface</button>
      <section class="g4r-next-steps">
        <h3>Next Steps</h3>
        <ol>
          <li>In your Qualtrics survey, open the Survey Flow and add an embedded
            data field named <code>g4r_pid</code> at the very top. Leave its value
            as "Value will be set from Panel or URL."</li>
          <li>Add a question of the Text/Graphic type where participants should
            reach the chat, open its JavaScript editor, and paste the code below.</li>
          <li>Collect responses, then download the message data from your
            Researcher Home and merge it with the survey export using the
            <code>g4r_pid</code> column.</li>
        </ol>
        <pre class="g4r-snippet"><code>${htmlEscape(snippet.snippet)}</code></pre>
        <button type="button" class="g4r-copy">${COPY_BUTTON_LABEL}</button>
      </section>
    `;

    this.root.querySelector<HTMLButtonElement>(".g4r-preview")!.addEventListener("click", () => {
      this.openTab(`${created.chat_url}?pid=${makeParticipantId()}`);
    });

    const copyButton = this.root.querySelector<HTMLButtonElement>(".g4r-copy")!;
    copyButton.addEventListener("click", () => {
      void this.clipboard
        .writeText(snippet.snippet)
        .then(() => {
          copyButton.textContent = "Copied!";
          setTimeout(() => {
            copyButton.textContent = COPY_BUTTON_LABEL;
          }, 1200);
        })
        .catch(() => {
          copyButton.textContent = "Copy failed - select the code and copy it manually";
        });
    });
  }

  // ---------------------------------------------------------------- sign in

  private renderSignIn(): void {
    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        <a href="#/">Go Back to G4R Home</a>
      </header>
      <h2>Sign In</h2>
      <form class="g4r-signin">
        <label>Email address <input type="email" name="email" required></label>
        <label>Password <input type="password" name="password" required></label>
        <p class="g4r-form-error"></p>
        <button type="submit">Sign In</button>
      </form>
    `;
    const form = this.root.querySelector<HTMLFormElement>("form.g4r-signin")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitSignIn(form);
    });
  }

  private async submitSignIn(form: HTMLFormElement): Promise<void> {
    const email = form.querySelector<HTMLInputElement>(`[name="email"]`)!.value;
    const password = form.querySelector<HTMLInputElement>(`[name="password"]`)!.value;
    const errorLine = form.querySelector<HTMLElement>(".g4r-form-error")!;
    try {
      const result = await this.client.signIn(email, password);
      this.storage.setItem(TOKEN_KEY, result.token);
      this.storage.setItem(NAME_KEY, result.researcher.name);
    } catch (error) {
      errorLine.textContent =
        error instanceof ApiError ? error.message : "The server could not be reached.";
      return;
    }
    void this.navigate("#/home");
    this.setHash("#/home");
  }

  // --------------------------------------------------------- create account

  private renderCreateAccount(): void {
    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        <a href="#/">Go Back to G4R Home</a>
      </header>
      <h2>Create an Account</h2>
      <form class="g4r-account">
        <label>Your name or nickname <input type="text" name="name" required></label>
        <label>Email address <input type="email" name="email" required></label>
        <label>Password <input type="password" name="password" required minlength="8"></label>
        <p class="g4r-hash-note">Your password is stored only as a salted hash; the
          operators of this service cannot recover what you enter.</p>
        <p class="g4r-form-error"></p>
        <button type="submit">Create an account</button>
      </form>
    `;
    const form = this.root.querySelector<HTMLFormElement>("form.g4r-account")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitCreateAccount(form);
    });
  }

  private async submitCreateAccount(form: HTMLFormElement): Promise<void> {
    const field = (name: string): string =>
      form.querySelector<HTMLInputElement>(`[name="${name}"]`)!.value;
    const errorLine = form.querySelector<HTMLElement>(".g4r-form-error")!;
    const email = field("email");
    const password = field("password");
    try {
      await this.client.createAccount(field("name"), email, password);
      // Sign straight in so "Go to Your Researcher Home" works immediately.
      const result = await this.client.signIn(email, password);
      this.storage.setItem(TOKEN_KEY, result.token);
      this.storage.setItem(NAME_KEY, result.researcher.name);
    } catch (error) {
      errorLine.textContent =
        error instanceof ApiError ? error.message : "The server could not be reached.";
      return;
    }
    this.root.innerHTML = `
      <h2>Your Account Has Been Created</h2>
      <p>You are now signed in.</p>
      <button type="button" class="g4r-to-home">Go to Your Researcher Home</button>
    `;
    this.root.querySelector<HTMLButtonElement>(".g4r-to-home")!.addEventListener("click", () => {
      void this.navigate("#/home");
      this.setHash("#/home");
    });
  }

  // ------------------------------------------------------- researcher home

  private async renderHome(): Promise<void> {
    if (!this.signedIn) {
      void this.navigate("#/signin");
      this.setHash("#/signin");
      return;
    }
    let interfaces: InterfaceSummary[];
    try {
      interfaces = await this.client.listInterfaces();
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) {
        // The stored token has expired: back to sign-in.
        this.signOut();
        void this.navigate("#/signin");
        this.setHash("#/signin");
        return;
      }
      this.root.innerHTML = `<p class="g4r-error">The server could not be reached. Reload to try again.</p>`;
      return;
    }

    const greeting = this.storage.getItem(NAME_KEY);
    const rows = interfaces
      .map(
        (item) => `
        <tr>
          <td>${htmlEscape(item.study_name)}</td>
          <td>${htmlEscape(item.created_at.slice(0, 10))}</td>
          <td><a href="#" class="g4r-download" data-interface-id="${htmlEscape(item.interface_id)}">Download</a></td>
        </tr>
      `,
      )
      .join("\n");

    this.root.innerHTML = `
      <header class="g4r-brand">
        <h1>G4R: GPT for Researchers</h1>
        <nav>
          <a href="#/">Go Back to G4R Home</a>
          <a href="#" class="g4r-signout">Sign out</a>
        </nav>
      </header>
      <h2>Researcher Home</h2>
      ${greeting ? `<p>Signed in as ${htmlEscape(greeting)}.</p>` : ""}
      <section class="g4r-create-entry">
        <button type="button" class="g4r-new-interface">Create a New GPT Interface</button>
      </section>
      <section class="g4r-downloads">
        <h3>${DOWNLOAD_HEADING}</h3>
        ${
          interfaces.length === 0
            ? `<p class="g4r-empty">You have not created any GPT Interfaces yet. Create your first one above, and its download link will appear here.</p>`
            : `<table class="g4r-interfaces">
                 <thead><tr><th>Study name</th><th>Created</th><th>Messages</th></tr></thead>
                 <tbody>${rows}</tbody>
               </table>`
        }
        <p class="g4r-samples">New to the format? Look at the
          <a href="/samples/sample_messages.csv">sample message data</a>, the
          <a href="/samples/sample_survey.csv">sample survey data</a>, and the
          <a href="/samples/sample_merged.csv">sample merged output</a>.</p>
      </section>
    `;

    this.root.querySelector<HTMLButtonElement>(".g4r-new-interface")!.addEventListener("click", () => {
      void this.navigate("#/create");
      this.setHash("#/create");
    });
    this.root.querySelector<HTMLAnchorElement>(".g4r-signout")!.addEventListener("click", (event) => {
      event.preventDefault();
      this.signOut();
      void this.navigate("#/");
      this.setHash("#/");
    });
    this.root.querySelectorAll<HTMLAnchorElement>(".g4r-download").forEach((link) => {
      link.addEventListener("click", (event) => {
        event.preventDefault();
        const interfaceId = link.dataset.interfaceId!;
        void this.client
          .downloadCsv(interfaceId)
          .then((blob) => this.saveFile(blob, "g4r_messages.csv"))
          .catch(() => {
            link.textContent = "Download failed - try again";
          });
      });
    });
  }
}

// Self-mount when loaded by the console page; inert when imported elsewhere
// (tests construct ConsoleApp against their own root).
const rootElement =
  typeof document !== "undefined" ? document.getElementById("g4r-console") : null;
if (rootElement) {
  const app = new ConsoleApp(rootElement, new ApiClient());
  app.start();
}
