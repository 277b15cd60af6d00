import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.utils.settings import REPORT_DIR

logger = logging.getLogger(__name__)


class ReportStore:
    """Run reports kept as JSON documents in one directory.

    Each record holds an id, the experiment name, a creation timestamp, a
    soft-delete flag and the report payload.
    """

    def __init__(self, root: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, record_id: str) -> Path:
        return self.root / f"{record_id}.json"

    def insert(self, record_id: str, name: str, report: Dict[str, Any]) -> dict:
        record = {
            "id": record_id,
            "name": name,
            "created_at": datetime.now(timezone.utc).isoformat(),
            "deleted": False,
            "report": report,
        }
        self._path(record_id).write_text(json.dumps(record), encoding="utf-8")
        logger.info("Stored report %s", record_id)
        return record

    def get(self, record_id: str) -> Optional[dict]:
        path = self._path(record_id)
        if not path.exists():
            return None
        record = json.loads(path.read_text(encoding="utf-8"))
        if record.get("deleted"):
            return None
        return record

    def history(self) -> List[dict]:
        records = []
        for path in self.root.glob("*.json"):
            record = json.loads(path.read_text(encoding="utf-8"))
            if record.get("deleted"):
                continue
            records.append(
                {
                    "id": record["id"],
                    "name": record["name"],
                    "created_at": record["created_at"],
                }
            )
        records.sort(key=lambda item: item["created_at"], reverse=True)
        return records

    def mark_deleted(self, record_id: str) -> bool:
        record = self.get(record_id)
        if record is None:
            return False
        record["deleted"] = True
        self._path(record_id).write_text(json.dumps(record), encoding="utf-8")
        return True


def get_report_store(root: Optional[str] = None) -> ReportStore:
    return ReportStore(root or os.environ.get("CUSBOOST_REPORT_DIR", REPORT_DIR))
