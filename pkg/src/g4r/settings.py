"""Deployment configuration, read once from environment variables.

Everything has a sane default so `g4r serve` works out of the box with a
local SQLite file; a real deployment typically sets G4R_DEFAULT_API_KEY
and G4R_DB_PATH.
"""

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    bind_addr: str = "127.0.0.1:8000"
    db_path: str = "g4r.db"
    default_api_key: str | None = None
    upstream_url: str = "https://api.openai.com/v1"
    model_id: str = "gpt-4o-mini"
    provider: str = "openai"  # "openai" or "echo" (offline testing)
    assets_dir: str | None = None  # overrides the packaged widget assets
    guest_create_limit: int = 20  # per-IP daily cap on guest-created interfaces

    @property
    def host(self) -> str:
        return self.bind_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_addr.rsplit(":", 1)[1])


def from_env(environ: dict[str, str] | None = None) -> Settings:
    env = os.environ if environ is None else environ
    defaults = Settings()
    return Settings(
        bind_addr=env.get("G4R_BIND_ADDR", defaults.bind_addr),
        db_path=env.get("G4R_DB_PATH", defaults.db_path),
        default_api_key=env.get("G4R_DEFAULT_API_KEY") or None,
        upstream_url=env.get("G4R_UPSTREAM_URL", defaults.upstream_url),
        model_id=env.get("G4R_MODEL_ID", defaults.model_id),
        provider=env.get("G4R_PROVIDER", defaults.provider),
        assets_dir=env.get("G4R_ASSETS_DIR") or None,
        guest_create_limit=int(env.get("G4R_GUEST_CREATE_LIMIT", defaults.guest_create_limit)),
    )
