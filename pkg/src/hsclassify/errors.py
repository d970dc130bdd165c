"""Exception hierarchy shared by all pipeline stages.

Every error raised by this package derives from :class:`HsClassifyError` and
carries a short machine-readable ``code`` (stable across releases, used by the
CLI/HTTP layers for structured error output) plus a human-readable message.
"""

from __future__ import annotations


class HsClassifyError(Exception):
    """Base class for all errors raised by this package."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)

    @property
    def detail(self) -> str:
        return str(self)
