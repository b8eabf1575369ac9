"""Estimator registry for the kinkwelfare runtime.

Maps estimation method names to fitting functions so grid cells can name their
estimator in configuration, and tracks how often each one is used.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import pandas as pd

from ..core.errors import EstimationError
from ..core.rkd import RkdFit, RkdSpec, fuzzy_rkd, pooled_two_kink_rkd, sharp_rkd

logger = logging.getLogger(__name__)

Estimator = Callable[..., RkdFit]

BUILTIN_ESTIMATORS: Dict[str, Estimator] = {
    "sharp": sharp_rkd,
    "fuzzy": fuzzy_rkd,
    "pooled": pooled_two_kink_rkd,
}


@dataclass
class EstimatorMetadata:
    """Metadata for a registered estimator."""

    name: str
    func: Estimator
    description: str = ""
    tags: List[str] = field(default_factory=list)
    usage_count: int = 0
    failure_count: int = 0
    enabled: bool = True


class EstimatorRegistry:
    """Thread-safe registry of RKD estimators."""

    def __init__(self):
        self._estimators: Dict[str, EstimatorMetadata] = {}
        self._lock = threading.RLock()
        self._register_builtin()

    def _register_builtin(self):
        for name, func in BUILTIN_ESTIMATORS.items():
            self.register(
                name, func, description=f"Built-in {name} RKD", tags=["builtin"]
            )

    def register(
        self,
        name: str,
        func: Estimator,
        description: str = "",
        tags: Optional[List[str]] = None,
    ) -> bool:
        """Register an estimator.

        Args:
            name: Method name used in specs and configuration
            func: Callable ``(data, spec) -> RkdFit``
            description: Human readable description
            tags: Tags for filtering

        Returns:
            True if registered, False if the name is taken
        """
        if not callable(func):
            raise ValueError(f"estimator '{name}' is not callable")
        with self._lock:
            if name in self._estimators:
                return False
            self._estimators[name] = EstimatorMetadata(
                name=name,
                func=func,
                description=description or f"{name} estimator",
                tags=tags or [],
            )
            return True

    def unregister(self, name: str) -> bool:
        with self._lock:
            return self._estimators.pop(name, None) is not None

    def is_available(self, name: str) -> bool:
        with self._lock:
            return name in self._estimators and self._estimators[name].enabled

    def get(self, name: str) -> Estimator:
        """Look up an enabled estimator.

        Raises:
            EstimationError: If the name is unknown or disabled.
        """
        with self._lock:
            metadata = self._estimators.get(name)
            if metadata is None or not metadata.enabled:
                raise EstimationError(f"estimator '{name}' not found or disabled")
            return metadata.func

    def fit(self, data: pd.DataFrame, spec: RkdSpec, **kwargs: Any) -> RkdFit:
        """Run the estimator named by ``spec.method``."""
        func = self.get(spec.method)
        with self._lock:
            self._estimators[spec.method].usage_count += 1
        try:
            return func(data, spec, **kwargs)
        except Exception:
            with self._lock:
                self._estimators[spec.method].failure_count += 1
            raise

    def list_estimators(
        self, tags: Optional[List[str]] = None, enabled_only: bool = True
    ) -> List[str]:
        with self._lock:
            names = []
            for name, metadata in self._estimators.items():
                if enabled_only and not metadata.enabled:
                    continue
                if tags and not any(tag in metadata.tags for tag in tags):
                    continue
                names.append(name)
            return sorted(names)

    def get_metadata(self, name: str) -> Optional[EstimatorMetadata]:
        with self._lock:
            return self._estimators.get(name)

    def get_stats(self) -> Dict[str, Dict[str, Any]]:
        """Usage statistics for every estimator."""
        with self._lock:
            return {
                name: {
                    "usage_count": m.usage_count,
                    "failure_count": m.failure_count,
                    "enabled": m.enabled,
                    "tags": list(m.tags),
                }
                for name, m in self._estimators.items()
            }

    def enable(self, name: str) -> bool:
        return self._set_enabled(name, True)

    def disable(self, name: str) -> bool:
        return self._set_enabled(name, False)

    def _set_enabled(self, name: str, enabled: bool) -> bool:
        with self._lock:
            if name not in self._estimators:
                return False
            self._estimators[name].enabled = enabled
            return True

    def clear(self):
        """Remove every estimator (useful for testing)."""
        with self._lock:
            self._estimators.clear()


# Global estimator registry instance
estimator_registry = EstimatorRegistry()
