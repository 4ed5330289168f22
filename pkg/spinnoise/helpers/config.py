import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional, Set, Tuple

import yaml
from pydantic import ValidationError

from spinnoise.errors.exceptions import (
    ConfigError,
    ConfigParseError,
    ConfigValidationError,
)
from spinnoise.helpers.constants import ENV_NESTED_DELIMITER, ENV_PREFIX
from spinnoise.interfaces.config import RunConfig

Provenance = Dict[str, str]


class StrictLoader(yaml.SafeLoader):
    """SafeLoader that refuses duplicate mapping keys."""

    def construct_mapping(self, node, deep=False):
        seen = {}
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if key in seen:
                raise ConfigParseError(
                    f"duplicate key '{key}' (first defined on line {seen[key]})",
                    line=key_node.start_mark.line + 1,
                    key=str(key),
                )
            seen[key] = key_node.start_mark.line + 1
        return super().construct_mapping(node, deep=deep)


def _leaf_paths(data: Any, prefix: str = ""):
    if isinstance(data, dict) and data:
        for key, value in data.items():
            yield from _leaf_paths(value, f"{prefix}{key}.")
    else:
        yield prefix[:-1]


def _has_path(data: Any, path: str) -> bool:
    for part in path.split("."):
        if not isinstance(data, dict) or part not in data:
            return False
        data = data[part]
    return True


def _env_name(path: str) -> str:
    return (ENV_PREFIX + path.replace(".", ENV_NESTED_DELIMITER)).upper()


class ConfigHelper:
    @staticmethod
    def load_document(text: str) -> Dict[str, Any]:
        """Parse a YAML (or JSON) document into a plain mapping."""
        try:
            data = yaml.load(text, Loader=StrictLoader)
        except yaml.MarkedYAMLError as e:
            mark = e.problem_mark or e.context_mark
            raise ConfigParseError(
                str(e.problem or e), line=mark.line + 1 if mark else None
            ) from e
        except yaml.YAMLError as e:
            raise ConfigParseError(str(e)) from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigParseError("top level of a config document must be a mapping", line=1)
        return data

    @staticmethod
    def apply_overrides(data: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
        """Set dotted key paths (`physical.b_dc`) on a copy of `data`."""
        data = copy.deepcopy(data)
        for path, value in (overrides or {}).items():
            node = data
            parts = path.split(".")
            for part in parts[:-1]:
                child = node.get(part)
                if child is None:
                    child = node[part] = {}
                elif not isinstance(child, dict):
                    raise ConfigValidationError(
                        f"cannot set '{path}': '{part}' is not a section", key=path
                    )
                node = child
            node[parts[-1]] = value
        return data

    @staticmethod
    def validate(data: Dict[str, Any]) -> RunConfig:
        try:
            return RunConfig(**data)
        except ValidationError as e:
            raise ConfigValidationError.from_pydantic(e) from e

    @staticmethod
    def provenance(config: RunConfig, data: Dict[str, Any]) -> Provenance:
        """Where each leaf value came from: env, file or default."""
        environ = {k.upper() for k in os.environ}
        out = {}
        for path in _leaf_paths(config.model_dump(mode="json")):
            sections = path.split(".")
            if any(
                _env_name(".".join(sections[: i + 1])) in environ
                for i in range(len(sections))
            ):
                out[path] = "env"
            elif _has_path(data, path):
                out[path] = "file"
            else:
                out[path] = "default"
        return out

    @staticmethod
    def parse_config(
        text: str, overrides: Optional[Dict[str, Any]] = None
    ) -> Tuple[RunConfig, Provenance]:
        """
        Validate a config document. Unknown keys, duplicate keys and
        violated invariants raise; missing keys take their defaults.
        `overrides` (dotted paths) are applied on top of the document and
        are reported as file values.
        """
        data = ConfigHelper.apply_overrides(ConfigHelper.load_document(text), overrides)
        config = ConfigHelper.validate(data)
        return config, ConfigHelper.provenance(config, data)

    @staticmethod
    def load_config(
        path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
    ) -> Tuple[RunConfig, Provenance]:
        """Read `path`, or start from an empty document when None."""
        if path is None:
            return ConfigHelper.parse_config("", overrides)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}", {"path": str(path)}) from e
        return ConfigHelper.parse_config(text, overrides)

    @staticmethod
    def dump_config(config: RunConfig, exclude: Optional[Set[str]] = None) -> str:
        """
        Serialise so that parse_config(dump_config(c))[0] == c. Keys in
        `exclude` are left out and come back as defaults.
        """
        return yaml.safe_dump(
            config.model_dump(mode="json", exclude=exclude),
            sort_keys=False,
            default_flow_style=None,
        )

    @staticmethod
    def save_config(
        config: RunConfig, path: Path, exclude: Optional[Set[str]] = None
    ) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(ConfigHelper.dump_config(config, exclude), encoding="utf-8")
