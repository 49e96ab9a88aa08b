"""Survey-platform embed snippets.

Generates the JavaScript a researcher pastes into a Qualtrics question so
each respondent gets a random participant ID that is (a) stored in the
survey's embedded data under ``g4r_pid`` and (b) passed to the chat
interface URL as ``?pid=``. The same ID landing in both datasets is what
makes transcripts and survey responses joinable afterwards.

Generation is deterministic: the same interface ID and access mode always
produce the same snippet text, so re-opening the snippet page never hands
the researcher a subtly different version to paste.
"""

from .models import AccessMode

EMBEDDED_DATA_KEY = "g4r_pid"
PARTICIPANT_ID_LENGTH = 16

OPEN_BUTTON_LABEL = "Open the Chat Interface"
IFRAME_HEIGHT_PX = 500

# Uniform random ID over [A-Za-z0-9]: rejection-sample bytes from the
# browser's CSPRNG, keeping only values below 248 (= 4 * 62) so the
# modulo is unbiased.
_PID_FUNCTION = """\
function makePid(length) {
    var alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    var pid = "";
    while (pid.length < length) {
        var bytes = new Uint8Array(length);
        crypto.getRandomValues(bytes);
        for (var i = 0; i < bytes.length && pid.length < length; i++) {
            if (bytes[i] < 4 * alphabet.length) {
                pid += alphabet[bytes[i] % alphabet.length];
            }
        }
    }
    return pid;
}"""


def embed_url(base_url: str, interface_id: str) -> str:
    """Chat page URL with the pid left for the snippet to append."""
    return f"{base_url.rstrip('/')}/embed/{interface_id}"


def build_snippet(interface_id: str, access_mode: AccessMode, base_url: str) -> str:
    """The complete paste-into-Qualtrics JavaScript for one interface."""
    url = embed_url(base_url, interface_id)
    if access_mode is AccessMode.NEW_TAB:
        body = f"""\
    var container = this.getQuestionContainer();
    var button = document.createElement("button");
    button.type = "button";
    button.textContent = "{OPEN_BUTTON_LABEL}";
    button.style.cssText = "background: green; color: white; padding: 12px 24px;"
        + " border: none; border-radius: 4px; font-size: 16px; cursor: pointer;";
    button.addEventListener("click", function () {{
        window.open("{url}?pid=" + encodeURIComponent(pid), "_blank");
    }});
    container.appendChild(button);"""
    else:
        body = f"""\
    var container = this.getQuestionContainer();
    var frame = document.createElement("iframe");
    frame.src = "{url}?pid=" + encodeURIComponent(pid);
    frame.style.cssText = "width: 100%; height: {IFRAME_HEIGHT_PX}px; border: none;";
    container.appendChild(frame);"""

    return f"""\
Qualtrics.SurveyEngine.addOnload(function () {{
{_indent(_PID_FUNCTION, "    ")}

    var pid = Qualtrics.SurveyEngine.getEmbeddedData("{EMBEDDED_DATA_KEY}");
    if (!pid) {{
        pid = makePid({PARTICIPANT_ID_LENGTH});
        Qualtrics.SurveyEngine.setEmbeddedData("{EMBEDDED_DATA_KEY}", pid);
    }}

{body}
}});"""


def _indent(text: str, prefix: str) -> str:
    return "\n".join(prefix + line if line else line for line in text.splitlines())
