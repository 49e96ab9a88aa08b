import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from g4r.api import create_app
from g4r.gateway import EchoProvider
from g4r.settings import Settings
from g4r.store import Store

# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "test.db")
    yield s
    s.close()


@pytest.fixture
def app(tmp_path):
    """App wired to a temp DB and the offline echo backend. The guest
    creation limit is off so tests can create interfaces freely; the one
    test that covers the limit builds its own app."""
    settings = Settings(
        db_path=str(tmp_path / "api.db"),
        guest_create_limit=0,
        default_api_key="test-key",
    )
    return create_app(settings, provider=EchoProvider())


@pytest.fixture
def client(app):
    with TestClient(app) as c:
        yield c


@pytest.fixture
def researcher(client):
    """An account plus its auth headers: (researcher_id, headers)."""
    resp = client.post(
        "/api/accounts",
        json={"name": "Dana Researcher", "email": "dana@example.edu", "password": "correct-horse"},
    )
    assert resp.status_code == 201
    researcher_id = resp.json()["researcher_id"]
    resp = client.post(
        "/api/signin", json={"email": "dana@example.edu", "password": "correct-horse"}
    )
    token = resp.json()["token"]
    return researcher_id, {"Authorization": f"Bearer {token}"}


@pytest.fixture
def live_server(tmp_path):
    """A real uvicorn server on an OS-assigned port, echo backend."""
    settings = Settings(
        db_path=str(tmp_path / "live.db"),
        guest_create_limit=0,
        default_api_key="test-key",
    )
    app = create_app(settings, provider=EchoProvider())
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


# ---------------------------------------------------------------------------
# acceptance summary
# ---------------------------------------------------------------------------
# Tests marked @pytest.mark.acceptance("A3", "cap-enforcement") get one
# PASS/FAIL line each in the terminal summary.

_acceptance_results: dict[str, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    criterion, name = marker.args
    if report.when == "call":
        _acceptance_results[criterion] = (name, "PASS" if report.passed else "FAIL")
    elif report.when == "setup" and report.failed:
        _acceptance_results[criterion] = (name, "FAIL")
    elif report.when == "setup" and report.skipped:
        _acceptance_results[criterion] = (name, "SKIP")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_acceptance_results, key=lambda c: int(c[1:])):
        name, verdict = _acceptance_results[criterion]
        terminalreporter.write_line(f"{criterion} {name}: {verdict}")
