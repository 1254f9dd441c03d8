"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class MaskforgeError(Exception):
    """Base class for all engine errors."""


class FormatError(MaskforgeError):
    """An interchange file is malformed: bad magic, truncated payload, bad JSON line."""


class ValidationError(MaskforgeError):
    """A record violates one of its documented invariants."""


class ParameterError(MaskforgeError):
    """An operation received arguments outside its contract."""


class ProviderError(MaskforgeError):
    """A segmentation or embedding backend failed or is unavailable."""


class VocabularyError(MaskforgeError):
    """Unknown text token for the synthetic embedding space."""

    def __init__(self, token: str, known: list[str]):
        self.token = token
        self.known = sorted(known)
        super().__init__(f"unknown token {token!r}; known tokens: {', '.join(self.known)}")


class CapacityError(MaskforgeError):
    """A sampling pool cannot satisfy the requested draw."""


class DegenerateTransformError(MaskforgeError):
    """A mask transform produced an empty bitmap."""


class ConfigError(MaskforgeError):
    """Configuration failed validation; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class BusyError(MaskforgeError):
    """A session already has a mutating job in flight."""


class StaleStateError(MaskforgeError):
    """A mutation was submitted against an outdated session state version."""
