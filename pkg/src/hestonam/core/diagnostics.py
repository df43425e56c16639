"""
Collector for soft numerical problems that must reach the user.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

logger = logging.getLogger(__name__)


@dataclass
class Diagnostics:
    """Ordered, de-duplicated warning messages."""

    messages: list[str] = field(default_factory=list)

    def warn(self, message: str, source: Optional[logging.Logger] = None) -> None:
        """Record a warning and log it once."""
        if message in self.messages:
            return
        self.messages.append(message)
        (source or logger).warning(message)

    def extend(self, messages: Iterable[str]) -> None:
        for message in messages:
            if message not in self.messages:
                self.messages.append(message)

    def __bool__(self) -> bool:
        return bool(self.messages)

    def __iter__(self):
        return iter(self.messages)
