"""Exception types shared across the engine.

Every error records the stage it originated from so the CLI can point at
the failing module without a traceback.
"""


class EngineError(Exception):
    """Base class for all engine failures."""

    def __init__(self, message, module=None):
        self.module = module
        self.message = message
        super().__init__(f"[{module}] {message}" if module else message)


class ShapeError(EngineError):
    """Tensor dimensions do not satisfy an operation's contract."""


class ValidationError(EngineError):
    """A value violates a type invariant (names the offending field)."""


class ParseError(EngineError):
    """A file is malformed; carries position information when known."""


class ConfigError(EngineError):
    """An engine or decoder configuration is inconsistent."""
