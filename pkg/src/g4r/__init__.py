"""Self-hostable parameterized chat interfaces for survey-based studies.

Researchers configure a chat interface (prompt, labels, message cap,
hidden prepend/append text), embed it in a survey via a generated
snippet, and download transcripts keyed by the same participant ID the
survey stores — ready to merge, one row per respondent.
"""

from .api import create_app
from .models import (
    AccessMode,
    InterfaceConfig,
    MessageExchange,
    ParticipantSession,
    ResearcherAccount,
    apply_defaults,
    validate_config,
)
from .settings import Settings, from_env
from .store import Store

__version__ = "0.1.0"

__all__ = [
    "AccessMode",
    "InterfaceConfig",
    "MessageExchange",
    "ParticipantSession",
    "ResearcherAccount",
    "Settings",
    "Store",
    "__version__",
    "apply_defaults",
    "create_app",
    "from_env",
    "validate_config",
]
