"""
In-memory history of check reports served by the HTTP service.

Provides functionality for:
- Bounded report storage (oldest entries dropped first)
- Filtering by check name
- A module-level singleton shared by all requests
"""
import threading
from typing import List, Optional

from app import config
from app.schemas import CheckReport


class ReportHistory:
    """
    Keeps the most recent check reports, newest last.
    """

    def __init__(self, max_size: int = 50):
        """
        Initialize report history.

        Args:
            max_size: Maximum number of reports to keep
        """
        self.max_size = max_size
        self._reports: List[CheckReport] = []
        self._lock = threading.Lock()

    def add(self, report: CheckReport):
        """
        Record a report, trimming the oldest ones beyond max_size.

        Args:
            report: Finished check report
        """
        with self._lock:
            self._reports.append(report)
            if len(self._reports) > self.max_size:
                self._reports = self._reports[-self.max_size:]

    def extend(self, reports: List[CheckReport]):
        for report in reports:
            self.add(report)

    def get_reports(self, check_name: Optional[str] = None) -> List[CheckReport]:
        """
        Get stored reports.

        Args:
            check_name: Only return reports of this check when given

        Returns:
            Reports in insertion order
        """
        with self._lock:
            reports = list(self._reports)
        if check_name is None:
            return reports
        return [r for r in reports if r.check_name == check_name]

    def clear(self):
        with self._lock:
            self._reports.clear()

    def __len__(self) -> int:
        return len(self._reports)


# Global report history instance
_report_history: Optional[ReportHistory] = None


def get_report_history() -> ReportHistory:
    """
    Get or create the global report history.

    Returns:
        ReportHistory sized by FUETER_HISTORY_SIZE
    """
    global _report_history

    if _report_history is None:
        _report_history = ReportHistory(max_size=config.get_history_size())

    return _report_history
