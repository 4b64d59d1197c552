from .app import build_app
from .store import NotAwaitingDecision, SessionStore, StaleSequence

__all__ = ["SessionStore", "NotAwaitingDecision", "StaleSequence", "build_app"]
