import dataclasses
import enum
import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def _normalise(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalise(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalise(obj.tolist())
    if isinstance(obj, np.generic):
        return _normalise(obj.item())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Path):
        return obj.as_posix()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _normalise(dataclasses.asdict(obj))
    if hasattr(obj, "model_dump"):
        return _normalise(obj.model_dump(mode="json"))
    if isinstance(obj, float) and not math.isfinite(obj):
        # JSON has no NaN/Inf; keep them readable and loadable
        return repr(obj)
    return obj


class JsonHelper:
    @staticmethod
    def dumps(data: Any) -> str:
        """Deterministic JSON: sorted keys, shortest round-trip floats."""
        return json.dumps(_normalise(data), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def write(path: Path, data: Any) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(JsonHelper.dumps(data), encoding="utf-8")

    @staticmethod
    def read(path: Path) -> Any:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def to_float(value: Any) -> float:
        """Inverse of the non-finite encoding used by dumps ("nan", "inf")."""
        return float(value)
