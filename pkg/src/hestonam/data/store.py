"""
Boundary cache for hestonam using TinyDB, keyed by the configuration hash.
"""

import logging
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from filelock import FileLock, Timeout as LockTimeout
from tinydb import Query, TinyDB

from ..core.lsm import BoundaryCurve
from ..exceptions import StoreError

logger = logging.getLogger(__name__)

DEFAULT_STORE_PATH = Path("~/.hestonam/boundaries.json").expanduser()
LOCK_TIMEOUT = 30.0


class BoundaryStore:
    """Fitted boundaries persisted across runs; every access holds a file lock."""

    def __init__(self, path: Optional[Union[str, Path]] = None, lock_timeout: float = LOCK_TIMEOUT):
        self.path = Path(path).expanduser() if path else DEFAULT_STORE_PATH
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.path) + ".lock", timeout=lock_timeout)

        try:
            self.db = TinyDB(str(self.path))
            self.boundaries = self.db.table("boundaries")
        except Exception as e:
            raise StoreError(f"Failed to open boundary store {self.path}", details=str(e)) from e

    @contextmanager
    def _locked(self):
        try:
            self._lock.acquire()
        except LockTimeout as e:
            raise StoreError(
                f"Boundary store {self.path} is locked by another process",
                recoverable=True,
            ) from e
        try:
            yield
        except ValueError as e:
            # json.JSONDecodeError from a truncated or foreign file
            raise StoreError(f"Boundary store {self.path} is unreadable", details=str(e)) from e
        finally:
            self._lock.release()

    def get(self, params_hash: str) -> Optional[BoundaryCurve]:
        """Stored boundary for a configuration hash, if any."""
        Entry = Query()
        with self._locked():
            docs = self.boundaries.search(Entry.params_hash == params_hash)
        if not docs:
            return None
        try:
            return BoundaryCurve.from_dict(docs[0]["boundary"])
        except (KeyError, TypeError, ValueError) as e:
            raise StoreError(f"Stored boundary {params_hash} is unreadable", details=str(e)) from e

    def put(self, boundary: BoundaryCurve) -> None:
        """Insert or replace the boundary under its params_hash."""
        if not boundary.params_hash:
            raise StoreError("Cannot store a boundary without params_hash")
        Entry = Query()
        doc = {
            "params_hash": boundary.params_hash,
            "stored_at": datetime.now().isoformat(),
            "boundary": boundary.to_dict(),
        }
        with self._locked():
            self.boundaries.upsert(doc, Entry.params_hash == boundary.params_hash)
        logger.info(f"Stored boundary {boundary.params_hash} in {self.path}")

    def remove(self, params_hash: str) -> bool:
        Entry = Query()
        with self._locked():
            removed = self.boundaries.remove(Entry.params_hash == params_hash)
        if removed:
            logger.info(f"Removed boundary {params_hash} from {self.path}")
        return len(removed) > 0

    def entries(self) -> list[dict]:
        """params_hash, stored_at and knot count of every stored boundary, sorted by hash."""
        with self._locked():
            docs = self.boundaries.all()
        rows = [
            {
                "params_hash": doc.get("params_hash", ""),
                "stored_at": doc.get("stored_at", ""),
                "knots": len(doc.get("boundary", {}).get("taus", [])),
            }
            for doc in docs
        ]
        return sorted(rows, key=lambda row: row["params_hash"])

    def close(self):
        """Close the database connection."""
        self.db.close()
