from .records import RecordIO
from .result_store import ResultStore

__all__ = ["RecordIO", "ResultStore"]
