// Participant chat widget.
//
// The embed page is a static shell; this script does all the work:
// read the interface id from the page, read the participant id from the
// query string (never from server-rendered markup), fetch the interface's
// public bootstrap, open (or resume) the session, then run the chat loop.

const root = document.getElementById("g4r-root");
const interfaceId = root ? root.dataset.interfaceId : null;

function participantIdFromUrl() {
  const pid = new URLSearchParams(window.location.search).get("pid");
  if (pid) return pid;
  // Preview mode: the page was opened without a survey-issued pid.
  const alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  let generated = "";
  while (generated.length < 16) {
    const bytes = new Uint8Array(16);
    crypto.getRandomValues(bytes);
    for (let i = 0; i < bytes.length && generated.length < 16; i++) {
      if (bytes[i] < 4 * alphabet.length) {
        generated += alphabet[bytes[i] % alphabet.length];
      }
    }
  }
  return "preview-" + generated;
}

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

function el(tag, className, text) {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

async function main() {
  if (!interfaceId) return;
  document.head.appendChild(el("style", null, STYLE));

  const bootResp = await fetch(`/api/interfaces/${encodeURIComponent(interfaceId)}/bootstrap`);
  if (!bootResp.ok) {
    root.appendChild(el("p", "g4r-error", "This chat interface could not be loaded."));
    return;
  }
  const boot = await bootResp.json();

  // The researcher-supplied top section applies only to the new-tab page;
  // inside a survey iframe the question itself provides the surrounding text.
  if (boot.top_html && boot.access_mode === "new_tab") {
    const top = el("div", "g4r-top");
    top.innerHTML = boot.top_html;
    root.appendChild(top);
  }
  const messages = el("div", "g4r-messages");
  const status = el("div", "g4r-status");
  const compose = el("div", "g4r-compose");
  const input = document.createElement("textarea");
  const send = el("button", null, "Send");
  compose.appendChild(input);
  compose.appendChild(send);
  root.appendChild(messages);
  root.appendChild(status);
  root.appendChild(compose);

  function addMessage(who, text, fromParticipant) {
    const bubble = el(
      "div",
      "g4r-msg " + (fromParticipant ? "g4r-from-participant" : "g4r-from-gpt")
    );
    bubble.appendChild(el("span", "g4r-who", who));
    bubble.appendChild(document.createTextNode(text));
    messages.appendChild(bubble);
    messages.scrollTop = messages.scrollHeight;
    return bubble;
  }

  function lockInput(message) {
    input.disabled = true;
    send.disabled = true;
    status.textContent = message || "";
  }

  if (boot.first_message) {
    addMessage(boot.gpt_label, boot.first_message, false);
  }

  const sessResp = await fetch(
    `/api/interfaces/${encodeURIComponent(interfaceId)}/sessions`,
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ participant_id: participantIdFromUrl() }),
    }
  );
  if (!sessResp.ok) {
    root.appendChild(el("p", "g4r-error", "This chat session could not be started."));
    compose.remove();
    return;
  }
  const session = await sessResp.json();
  let remaining = session.remaining;
  for (const exchange of session.history) {
    addMessage(boot.participant_label, exchange.participant_message, true);
    addMessage(boot.gpt_label, exchange.gpt_message, false);
  }
  if (remaining <= 0) {
    lockInput("You have sent the maximum allowed messages");
  }

  async function submit() {
    const text = input.value;
    if (!text.trim() || send.disabled) return;
    input.value = "";
    const pending = addMessage(boot.participant_label, text, true);
    send.disabled = true;
    status.textContent = "...";
    try {
      const resp = await fetch(
        `/api/sessions/${encodeURIComponent(session.session_id)}/messages`,
        {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ text }),
        }
      );
      if (resp.status === 409) {
        // Rejected, so nothing was captured: drop the optimistic bubble.
        pending.remove();
        lockInput(await resp.text());
        return;
      }
      if (!resp.ok) {
        pending.remove();
        status.textContent = "Something went wrong; please try sending again.";
        status.classList.add("g4r-error");
        send.disabled = false;
        input.value = text;
        return;
      }
      const data = await resp.json();
      addMessage(boot.gpt_label, data.reply, false);
      remaining = data.remaining;
      status.classList.remove("g4r-error");
      status.textContent = "";
      if (remaining <= 0) {
        lockInput("You have sent the maximum allowed messages");
      } else {
        send.disabled = false;
      }
    } catch (err) {
      pending.remove();
      status.textContent = "Network problem; please try sending again.";
      status.classList.add("g4r-error");
      send.disabled = false;
      input.value = text;
    }
  }

  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      submit();
    }
  });
}

main();
