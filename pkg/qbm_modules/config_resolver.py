#!/usr/bin/env python3
"""
QBM Lab - Configuration Variable Resolution Module
==================================================

Resolves variables and paths inside a loaded run configuration:

- ``${dotted.path}`` substitution against the document itself (a free-form
  ``variables:`` block is the usual source)
- Tilde (~) expansion for paths
- Nested references resolved over repeated passes
- Circular or dangling references reported instead of left in place

A string that consists of a single reference takes the referenced value
with its type, so ``dt: ${variables.dt}`` stays a number.

Example:
    config = {
        'variables': {'dt': 0.0025, 'root': '~/runs'},
        'solver': {'dt': '${variables.dt}'},
        'output': {'directory': '${variables.root}/criterion1'},
    }
    resolved = ConfigResolver(config).resolve_variables()
    # {'solver': {'dt': 0.0025}, 'output': {'directory': '/home/user/runs/criterion1'}, ...}

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import re
from pathlib import Path
from typing import Any, Dict, List

logger = logging.getLogger("qbm_lab.config_resolver")

_REFERENCE = re.compile(r"\$\{([^}]+)\}")


class ConfigResolver:
    """
    Variable substitution and path expansion for run configurations.

    Attributes:
        config: the document as loaded
        unresolved: ``key.path: ${ref}`` descriptions left after the last pass
    """

    def __init__(self, config: Dict[str, Any], max_iterations: int = 10):
        self.config = config
        self.max_iterations = max_iterations
        self.unresolved: List[str] = []

    def resolve_variables(self, config: Dict[str, Any] = None) -> Dict[str, Any]:
        """
        Expand tildes, then resolve references until nothing changes.

        Returns:
            Dict[str, Any]: the resolved document; check ``unresolved`` afterwards
        """
        if config is None:
            config = self.config
        current = self._expand_tilde_paths(config)
        for _ in range(self.max_iterations):
            resolved = self._single_pass(current, current)
            if resolved == current:
                break
            current = resolved
        else:
            logger.warning(f"⚠️  references still changing after {self.max_iterations} passes (circular?)")
        self.unresolved = self._collect_unresolved(current, "")
        return current

    def _expand_tilde_paths(self, obj: Any) -> Any:
        if isinstance(obj, dict):
            return {key: self._expand_tilde_paths(value) for key, value in obj.items()}
        if isinstance(obj, list):
            return [self._expand_tilde_paths(item) for item in obj]
        if isinstance(obj, str) and obj.startswith("~"):
            return str(Path(obj).expanduser())
        return obj

    def _single_pass(self, obj: Any, root: Dict[str, Any]) -> Any:
        if isinstance(obj, dict):
            return {key: self._single_pass(value, root) for key, value in obj.items()}
        if isinstance(obj, list):
            return [self._single_pass(item, root) for item in obj]
        if isinstance(obj, str):
            return self._resolve_string(obj, root)
        return obj

    def _resolve_string(self, text: str, root: Dict[str, Any]) -> Any:
        whole = _REFERENCE.fullmatch(text.strip())
        if whole:
            try:
                value = self._get_nested_value(root, whole.group(1))
            except KeyError:
                return text
            return value if not isinstance(value, (dict, list)) else text

        def replace(match: "re.Match") -> str:
            try:
                value = self._get_nested_value(root, match.group(1))
            except KeyError:
                return match.group(0)
            return match.group(0) if isinstance(value, (dict, list)) or value is None else str(value)

        return _REFERENCE.sub(replace, text)

    def _get_nested_value(self, config: Dict[str, Any], path: str) -> Any:
        """
        Look up a dot-separated path.

        Raises:
            KeyError: path missing from the document
        """
        current: Any = config
        for key in path.strip().split("."):
            if isinstance(current, dict) and key in current:
                current = current[key]
            else:
                raise KeyError(path)
        return current

    def _collect_unresolved(self, obj: Any, prefix: str) -> List[str]:
        found: List[str] = []
        if isinstance(obj, dict):
            for key, value in obj.items():
                found.extend(self._collect_unresolved(value, f"{prefix}.{key}" if prefix else str(key)))
        elif isinstance(obj, list):
            for index, item in enumerate(obj):
                found.extend(self._collect_unresolved(item, f"{prefix}[{index}]"))
        elif isinstance(obj, str):
            for match in _REFERENCE.finditer(obj):
                found.append(f"{prefix}: unresolved reference ${{{match.group(1)}}}")
        return found
