"""HTTP surface: researcher endpoints, participant endpoints, embed page.

Everything a browser or script can reach lives here; the modules underneath
know nothing about HTTP. Handlers are plain ``def`` so they run in the
server's worker threads, which is what the SQLite store expects.

Authorization model:
  * researcher endpoints take ``Authorization: Bearer <token>`` from sign-in
  * interface creation also works unauthenticated ("guest" mode, rate
    limited per address) so the tool can be tried without an account
  * participant endpoints are unauthenticated by design — participants
    only ever hold an interface ID and their own session ID
"""

import html
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import engine as engine_mod
from . import export, snippet, store as store_mod
from .engine import CAP_MESSAGE, CapReached, ChatEngine, MessageTooLong, UpstreamFailure
from .gateway import CompletionProvider, EchoProvider, OpenAIChatClient
from .models import (
    DEFAULT_FIRST_MESSAGE,
    DEFAULT_GPT_LABEL,
    DEFAULT_MAX_MESSAGES,
    DEFAULT_PARTICIPANT_LABEL,
    DEFAULT_TEMPERATURE,
    LABEL_MAX_CHARS,
    MAX_MESSAGES_CEILING,
    STUDY_NAME_MAX_CHARS,
    TEMPERATURE_MAX,
    TEMPERATURE_MIN,
    FieldError,
    InterfaceConfig,
    ResearcherAccount,
    apply_defaults,
    format_timestamp,
    utc_now,
    validate_config,
)
from .settings import Settings
from .store import AuthFailed, DuplicateEmail, InvalidEmail, NotFound, Store, WeakPassword

WINDOW_TITLE = "ChatGPT Interface for Prolific Studies"

# Shown in place of a stored API key; the real key never leaves the server.
MASKED_KEY = "********"

_PACKAGED_ASSETS = Path(__file__).parent / "static" / "assets"
_PACKAGED_SAMPLES = Path(__file__).parent / "static" / "samples"

_EMBED_PAGE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1">
<title>{title}</title>
</head>
<body>
<div id="g4r-root" data-interface-id="{interface_id}"></div>
<script type="module" src="/assets/widget.js"></script>
</body>
</html>
"""

_LANDING_PAGE = """<!DOCTYPE html>
<html lang="en">
<head><meta charset="utf-8"><title>G4R</title></head>
<body>
<h1>G4R</h1>
<p>The service is running. The researcher console has not been installed;
point G4R_ASSETS_DIR at a console build, or use the HTTP API directly.</p>
</body>
</html>
"""


class AccountCreate(BaseModel):
    name: str
    email: str
    password: str


class SigninRequest(BaseModel):
    email: str
    password: str


class InterfaceDraft(BaseModel):
    """Creation payload; every question is optional and unanswered ones
    take the documented defaults. Bounds are checked after defaulting so
    the error list matches what the form showed the researcher."""

    study_name: str | None = None
    access_mode: str | None = None
    max_messages: int | None = None
    participant_label: str | None = None
    gpt_label: str | None = None
    system_prompt: str | None = None
    first_message: str | None = None
    temperature: float | str | None = None
    prepend_text: str | None = None
    append_text: str | None = None
    api_key: str | None = None
    top_html: str | None = None


class SessionOpen(BaseModel):
    participant_id: str


class ParticipantMessage(BaseModel):
    text: str


class _GuestQuota:
    """Per-address daily counter for unauthenticated interface creation.
    A limit of 0 disables the check."""

    def __init__(self, limit: int):
        self._limit = limit
        self._counts: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def try_acquire(self, address: str) -> bool:
        if self._limit <= 0:
            return True
        key = (address, utc_now().date().isoformat())
        with self._lock:
            count = self._counts.get(key, 0)
            if count >= self._limit:
                return False
            self._counts[key] = count + 1
            return True


def _field_errors(errors: list[FieldError]) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={
            "errors": [
                {"field": e.field, "code": e.code, "message": e.message} for e in errors
            ]
        },
    )


def _public_config(cfg: InterfaceConfig) -> dict:
    """Researcher-facing view of a config. The API key is masked; the
    temperature keeps the exact text the researcher entered."""
    return {
        "interface_id": cfg.interface_id,
        "study_name": cfg.study_name,
        "access_mode": cfg.access_mode.value,
        "max_messages": cfg.max_messages,
        "participant_label": cfg.participant_label,
        "gpt_label": cfg.gpt_label,
        "temperature": str(cfg.temperature),
        "system_prompt": cfg.system_prompt,
        "first_message": cfg.first_message,
        "prepend_text": cfg.prepend_text,
        "append_text": cfg.append_text,
        "api_key": MASKED_KEY if cfg.api_key is not None else None,
        "top_html": cfg.top_html,
        "owner_id": cfg.owner_id,
        "created_at": format_timestamp(cfg.created_at),
    }


def _bootstrap(cfg: InterfaceConfig) -> dict:
    """What the participant-facing widget is allowed to know. Strictly a
    whitelist: prompt text, injected text, and keys must never ride along."""
    return {
        "interface_id": cfg.interface_id,
        "study_name": cfg.study_name,
        "participant_label": cfg.participant_label,
        "gpt_label": cfg.gpt_label,
        "first_message": cfg.first_message,
        "max_messages": cfg.max_messages,
        "access_mode": cfg.access_mode.value,
        "top_html": cfg.top_html,
    }


def _account_json(account: ResearcherAccount) -> dict:
    return {
        "researcher_id": account.researcher_id,
        "name": account.display_name,
        "email": account.email,
        "created_at": format_timestamp(account.created_at),
    }


def create_app(
    settings: Settings | None = None,
    *,
    store: Store | None = None,
    provider: CompletionProvider | None = None,
) -> FastAPI:
    settings = settings or Settings()
    store = store or Store(settings.db_path)
    if provider is None:
        if settings.provider == "echo":
            provider = EchoProvider()
        else:
            provider = OpenAIChatClient(settings.upstream_url)
    engine = ChatEngine(
        store,
        provider,
        model_id=settings.model_id,
        server_api_key=settings.default_api_key,
    )
    guest_quota = _GuestQuota(settings.guest_create_limit)

    app = FastAPI(title="G4R", docs_url=None, redoc_url=None)
    app.state.settings = settings
    app.state.store = store
    app.state.engine = engine
    app.state.provider = provider

    assets_dir = Path(settings.assets_dir) if settings.assets_dir else _PACKAGED_ASSETS
    app.mount("/assets", StaticFiles(directory=assets_dir), name="assets")
    app.mount("/samples", StaticFiles(directory=_PACKAGED_SAMPLES), name="samples")

    def current_account(request: Request) -> ResearcherAccount | None:
        """None means no Authorization header at all (guest). A header that
        is present but unusable is a hard 401, never silently a guest."""
        header = request.headers.get("authorization")
        if header is None:
            return None
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token.strip():
            raise HTTPException(status_code=401, detail="malformed Authorization header")
        try:
            return store.resolve_token(token.strip())
        except AuthFailed as err:
            raise HTTPException(status_code=401, detail=str(err))

    def require_account(request: Request) -> ResearcherAccount:
        account = current_account(request)
        if account is None:
            raise HTTPException(status_code=401, detail="authentication required")
        return account

    def base_url(request: Request) -> str:
        return str(request.base_url).rstrip("/")

    def interface_links(request: Request, interface_id: str) -> dict:
        base = base_url(request)
        return {
            "chat_url": f"{base}/embed/{interface_id}",
            "snippet_url": f"{base}/api/interfaces/{interface_id}/snippet",
            "csv_url": f"{base}/api/interfaces/{interface_id}/messages.csv",
        }

    # -- health & defaults ----------------------------------------------------

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/defaults")
    def defaults() -> dict:
        """The creation form's defaults and bounds, served so every client
        renders the same values the server will apply."""
        return {
            "participant_label": DEFAULT_PARTICIPANT_LABEL,
            "gpt_label": DEFAULT_GPT_LABEL,
            "first_message": DEFAULT_FIRST_MESSAGE,
            "temperature": str(DEFAULT_TEMPERATURE),
            "max_messages": DEFAULT_MAX_MESSAGES,
            "access_mode": "new_tab",
            "bounds": {
                "study_name_max_chars": STUDY_NAME_MAX_CHARS,
                "label_max_chars": LABEL_MAX_CHARS,
                "max_messages_ceiling": MAX_MESSAGES_CEILING,
                "temperature_min": str(TEMPERATURE_MIN),
                "temperature_max": str(TEMPERATURE_MAX),
            },
        }

    # -- researcher accounts ----------------------------------------------------

    @app.post("/api/accounts", status_code=201)
    def create_account(body: AccountCreate) -> dict:
        if not body.name.strip():
            raise HTTPException(status_code=422, detail="name must not be empty")
        try:
            account = store.create_account(body.name.strip(), body.email, body.password)
        except DuplicateEmail as err:
            raise HTTPException(status_code=409, detail=str(err))
        except (InvalidEmail, WeakPassword) as err:
            raise HTTPException(status_code=422, detail=str(err))
        return _account_json(account)

    @app.post("/api/signin")
    def signin(body: SigninRequest) -> dict:
        try:
            account = store.verify_credentials(body.email, body.password)
        except AuthFailed as err:
            # Identical status and body for unknown email and wrong password.
            raise HTTPException(status_code=401, detail=str(err))
        token, expires_at = store.issue_token(account.researcher_id)
        return {
            "token": token,
            "expires_at": format_timestamp(expires_at),
            "researcher": _account_json(account),
        }

    @app.get("/api/researcher/interfaces")
    def list_interfaces(request: Request) -> dict:
        account = require_account(request)
        interfaces = [
            {
                "interface_id": interface_id,
                "study_name": study_name,
                "created_at": format_timestamp(created_at),
                **interface_links(request, interface_id),
            }
            for interface_id, study_name, created_at in store.list_interfaces(
                account.researcher_id
            )
        ]
        return {"interfaces": interfaces}

    # -- interfaces ------------------------------------------------------------

    @app.post("/api/interfaces", status_code=201)
    def create_interface(request: Request, draft: InterfaceDraft):
        account = current_account(request)
        if account is None:
            address = request.client.host if request.client else "unknown"
            if not guest_quota.try_acquire(address):
                raise HTTPException(
                    status_code=429,
                    detail="daily guest interface limit reached; create an account to continue",
                )
        try:
            # Only fields the client actually sent: absent means "use the
            # default", an explicit null or empty string means "cleared".
            cfg = apply_defaults(
                draft.model_dump(exclude_unset=True),
                owner_id=account.researcher_id if account else None,
            )
        except ValueError:
            return _field_errors(
                [
                    FieldError(
                        "access_mode",
                        "UnknownAccessMode",
                        "access mode must be new_tab or embedded",
                    )
                ]
            )
        except ArithmeticError:
            return _field_errors(
                [
                    FieldError(
                        "temperature",
                        "TemperatureOutOfRange",
                        "temperature must be a number between 0.0 and 2.0 (inclusive)",
                    )
                ]
            )
        errors = validate_config(cfg)
        if errors:
            return _field_errors(errors)
        store.save_interface(cfg)
        return JSONResponse(
            status_code=201,
            content={
                "interface_id": cfg.interface_id,
                **interface_links(request, cfg.interface_id),
                "config": _public_config(cfg),
            },
        )

    @app.get("/api/interfaces/{interface_id}/bootstrap")
    def interface_bootstrap(interface_id: str) -> dict:
        try:
            cfg = store.get_interface(interface_id)
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown interface")
        return _bootstrap(cfg)

    @app.get("/api/interfaces/{interface_id}/snippet")
    def interface_snippet(request: Request, interface_id: str) -> dict:
        try:
            cfg = store.get_interface(interface_id)
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown interface")
        base = base_url(request)
        return {
            "interface_id": cfg.interface_id,
            "access_mode": cfg.access_mode.value,
            "embed_url": snippet.embed_url(base, cfg.interface_id),
            "snippet": snippet.build_snippet(cfg.interface_id, cfg.access_mode, base),
        }

    @app.get("/api/interfaces/{interface_id}/messages.csv")
    def download_messages(request: Request, interface_id: str) -> Response:
        account = require_account(request)
        try:
            cfg = store.get_interface(interface_id)
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown interface")
        if cfg.owner_id is None or cfg.owner_id != account.researcher_id:
            raise HTTPException(
                status_code=403, detail="only the interface owner can download messages"
            )
        return Response(
            content=export.export_csv(store, interface_id),
            media_type="text/csv; charset=utf-8",
            headers={
                "Content-Disposition": f'attachment; filename="{export.EXPORT_FILENAME}"'
            },
        )

    # -- participant chat --------------------------------------------------------

    @app.post("/api/interfaces/{interface_id}/sessions")
    def open_session(interface_id: str, body: SessionOpen) -> dict:
        try:
            session = engine.start_session(interface_id, body.participant_id)
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err))
        except NotFound:
            raise HTTPException(status_code=404, detail="unknown interface")
        cfg = store.get_interface(interface_id)
        history = [
            {
                "seq": exchange.seq,
                "participant_message": exchange.participant_message,
                "gpt_message": exchange.gpt_message,
                "exchanged_at": format_timestamp(exchange.exchanged_at),
            }
            for exchange in store.fetch_session_exchanges(session.session_id)
        ]
        return {
            "session_id": session.session_id,
            "participant_id": session.participant_id,
            "remaining": engine.remaining_quota(cfg, session),
            "history": history,
        }

    @app.post("/api/sessions/{session_id}/messages")
    def send_message(session_id: str, body: ParticipantMessage):
        try:
            reply, remaining = engine.handle_participant_message(session_id, body.text)
        except store_mod.UnknownSession:
            raise HTTPException(status_code=404, detail="unknown session")
        except CapReached:
            return PlainTextResponse(CAP_MESSAGE, status_code=409)
        except MessageTooLong as err:
            raise HTTPException(status_code=413, detail=str(err))
        except UpstreamFailure as err:
            raise HTTPException(status_code=502, detail=str(err))
        return {"reply": reply, "remaining": remaining}

    # -- pages ---------------------------------------------------------------

    @app.get("/embed/{interface_id}", response_class=HTMLResponse)
    def embed_page(interface_id: str) -> HTMLResponse:
        """The chat page itself. Deliberately does not read the pid query
        parameter: the page is a static shell, and the widget script takes
        the pid from location.search in the browser, so the server can
        never bake one respondent's ID into a cached page."""
        try:
            store.get_interface(interface_id)
        except NotFound:
            return HTMLResponse("<h1>Unknown chat interface</h1>", status_code=404)
        return HTMLResponse(
            _EMBED_PAGE.format(
                title=html.escape(WINDOW_TITLE),
                interface_id=html.escape(interface_id),
            )
        )

    @app.get("/", response_class=HTMLResponse)
    def index() -> HTMLResponse:
        page = assets_dir / "index.html"
        if page.exists():
            return HTMLResponse(page.read_text(encoding="utf-8"))
        return HTMLResponse(_LANDING_PAGE)

    return app
