/**
 * Participant chat widget.
 *
 * The embed page is a static shell containing only `#g4r-root` with the
 * interface id in a data attribute; this module does all the work: fetch the
 * interface's public bootstrap, open (or resume) the session for the
 * participant id carried in the query string, then run the chat loop.
 *
 * Everything shown to the participant comes from the bootstrap payload —
 * labels, the opening message, the researcher's top section — and the text in
 * participant bubbles is exactly what they typed. Any prepend/append text the
 * researcher configured travels server-side only and never appears here.
 */

import {
  ApiClient,
  ApiError,
  CAP_MESSAGE,
  CapError,
  UpstreamError,
  type WidgetBootstrap,
} from "./api.js";
import { makeParticipantId } from "./pid.js";

export const WINDOW_TITLE = "ChatGPT Interface for Prolific Studies";

const STYLE = `
  #g4r-root { max-width: 720px; margin: 0 auto; font-family: system-ui, sans-serif; }
  .g4r-top { margin: 8px 0; }
  .g4r-messages { display: flex; flex-direction: column; gap: 10px; padding: 12px 4px;
    min-height: 200px; }
  .g4r-msg { max-width: 85%; padding: 8px 12px; border-radius: 10px; white-space: pre-wrap;
    overflow-wrap: break-word; }
  .g4r-msg .g4r-who { display: block; font-size: 12px; font-weight: 600; opacity: 0.7;
    margin-bottom: 2px; }
  .g4r-from-participant { align-self: flex-end; background: #d7e9ff; }
  .g4r-from-gpt { align-self: flex-start; background: #eee; }
  .g4r-compose { display: flex; gap: 8px; padding: 8px 4px; }
  .g4r-compose textarea { flex: 1; resize: vertical; min-height: 44px; padding: 8px;
    font: inherit; }
  .g4r-compose button { padding: 8px 20px; font: inherit; cursor: pointer; }
  .g4r-status { padding: 2px 4px; font-size: 13px; color: #555; min-height: 18px; }
  .g4r-error { color: #a00; }
`;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class ChatWidget {
  private bootstrap: WidgetBootstrap | null = null;
  private sessionId: string | null = null;
  private remaining = 0;
  private inFlight = false;
  private capped = false;

  private messages!: HTMLDivElement;
  private status!: HTMLDivElement;
  private input!: HTMLTextAreaElement;
  private sendButton!: HTMLButtonElement;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
  ) {}

  async mount(interfaceId: string, participantId: string): Promise<void> {
    this.root.replaceChildren();

    try {
      this.bootstrap = await this.client.bootstrap(interfaceId);
    } catch {
      this.renderRetryPrompt(interfaceId, participantId);
      return;
    }
    this.renderShell(this.bootstrap);

    try {
      const session = await this.client.openSession(interfaceId, participantId);
      this.sessionId = session.session_id;
      this.remaining = session.remaining;
      for (const exchange of session.history) {
        this.addBubble(this.bootstrap.participant_label, exchange.participant_message, true);
        this.addBubble(this.bootstrap.gpt_label, exchange.gpt_message, false);
      }
    } catch {
      this.status.textContent = "This chat session could not be started.";
      this.status.classList.add("g4r-error");
      this.capped = true; // nothing can be sent without a session
      this.updateControls();
      return;
    }

    if (this.remaining <= 0) {
      this.lock(CAP_MESSAGE);
    }
    this.updateControls();
  }

  /** Bootstrap fetch failed: offer a retry instead of a dead page. */
  private renderRetryPrompt(interfaceId: string, participantId: string): void {
    const notice = el("p", "g4r-error", "This chat interface could not be loaded.");
    const retry = el("button", "g4r-retry", "Retry");
    retry.addEventListener("click", () => {
      void this.mount(interfaceId, participantId);
    });
    this.root.appendChild(notice);
    this.root.appendChild(retry);
  }

  private renderShell(bootstrap: WidgetBootstrap): void {
    if (!document.getElementById("g4r-style")) {
      const style = el("style", undefined, STYLE);
      style.id = "g4r-style";
      document.head.appendChild(style);
    }

    // The researcher-supplied top section applies only to the new-tab page;
    // inside a survey iframe the question itself provides the surrounding
    // text. The markup is researcher-authored and rendered verbatim.
    if (bootstrap.top_html && bootstrap.access_mode === "new_tab") {
      const top = el("div", "g4r-top");
      top.innerHTML = bootstrap.top_html;
      this.root.appendChild(top);
    }

    this.messages = el("div", "g4r-messages");
    this.status = el("div", "g4r-status");
    const compose = el("div", "g4r-compose");
    this.input = el("textarea");
    this.sendButton = el("button", undefined, "Send");
    compose.appendChild(this.input);
    compose.appendChild(this.sendButton);
    this.root.appendChild(this.messages);
    this.root.appendChild(this.status);
    this.root.appendChild(compose);

    if (bootstrap.first_message) {
      this.addBubble(bootstrap.gpt_label, bootstrap.first_message, false);
    }

    this.sendButton.addEventListener("click", () => {
      void this.send();
    });
    this.input.addEventListener("keydown", (event: KeyboardEvent) => {
      if (event.key === "Enter" && !event.shiftKey) {
        event.preventDefault();
        void this.send();
      }
    });
  }

  private addBubble(label: string, text: string, fromParticipant: boolean): HTMLElement {
    const bubble = el(
      "div",
      "g4r-msg " + (fromParticipant ? "g4r-from-participant" : "g4r-from-gpt"),
    );
    bubble.appendChild(el("span", "g4r-who", label));
    bubble.appendChild(document.createTextNode(text));
    this.messages.appendChild(bubble);
    this.messages.scrollTop = this.messages.scrollHeight;
    return bubble;
  }

  private lock(message: string): void {
    this.capped = true;
    this.status.classList.remove("g4r-error");
    this.status.textContent = message;
    this.updateControls();
  }

  private updateControls(): void {
    const enabled = !this.capped && !this.inFlight && this.remaining > 0;
    this.sendButton.disabled = !enabled;
    this.input.disabled = this.capped;
  }

  async send(): Promise<void> {
    const bootstrap = this.bootstrap;
    const text = this.input.value;
    if (!bootstrap || !this.sessionId || !text.trim()) {
      return;
    }
    if (this.capped || this.inFlight || this.remaining <= 0) {
      return;
    }

    this.input.value = "";
    const pending = this.addBubble(bootstrap.participant_label, text, true);
    this.inFlight = true;
    this.status.classList.remove("g4r-error");
    this.status.textContent = "...";
    this.updateControls();

    try {
      const result = await this.client.sendMessage(this.sessionId, text);
      this.addBubble(bootstrap.gpt_label, result.reply, false);
      this.remaining = result.remaining;
      this.status.textContent = "";
      if (this.remaining <= 0) {
        this.lock(CAP_MESSAGE);
      }
    } catch (error) {
      // Nothing was captured on any failure path, so the optimistic bubble
      // would show a message that never reached the transcript: drop it.
      pending.remove();
      if (error instanceof CapError) {
        this.lock(error.message);
      } else if (error instanceof UpstreamError) {
        this.offerRetry(text, "Your message was not delivered. Press Send to try again.");
      } else if (error instanceof ApiError) {
        this.offerRetry(text, "Something went wrong; please try sending again.");
      } else {
        this.offerRetry(text, "Network problem; please try sending again.");
      }
    } finally {
      this.inFlight = false;
      this.updateControls();
    }
  }

  /** Put the undelivered text back so one more Send resubmits it unchanged. */
  private offerRetry(text: string, notice: string): void {
    this.input.value = text;
    this.status.textContent = notice;
    this.status.classList.add("g4r-error");
  }
}

export function participantIdFromUrl(search: string): string {
  const pid = new URLSearchParams(search).get("pid");
  if (pid) {
    return pid;
  }
  // Preview mode: the page was opened without a survey-issued pid.
  return "preview-" + makeParticipantId();
}

// Self-mount when loaded by the embed page; inert when imported elsewhere
// (tests construct ChatWidget against their own root).
const rootElement = typeof document !== "undefined" ? document.getElementById("g4r-root") : null;
if (rootElement && rootElement.dataset.interfaceId) {
  const widget = new ChatWidget(rootElement, new ApiClient());
  void widget.mount(rootElement.dataset.interfaceId, participantIdFromUrl(window.location.search));
}
