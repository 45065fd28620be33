from typing import Any, Dict, Optional, Tuple
import hashlib
import json
import logging
import os
import threading
from datetime import datetime
from pathlib import Path
import numpy as np

logger = logging.getLogger(__name__)

CACHE_ENV = "MAXWELL_HMM_CACHE"
DEFAULT_CACHE_DIR = "./reference_cache"


def cache_key(inputs: Dict[str, Any]) -> str:
    """Stable hash of every input that determines a cached solution"""
    canonical = json.dumps(inputs, sort_keys=True, default=_jsonable)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:24]


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"Cannot hash {type(value).__name__}")


class ReferenceCache:
    """Fine reference solutions stored as .npz arrays with a JSON index"""

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir = Path(cache_dir or os.environ.get(CACHE_ENV, DEFAULT_CACHE_DIR))
        self.index_file = self.cache_dir / "index.json"
        self.index: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._initialize_cache()
        self._load_index()

    def _initialize_cache(self) -> None:
        """Create the cache directory and an empty index if missing"""
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        if not self.index_file.exists():
            self.index_file.write_text("{}")

    def _load_index(self) -> None:
        try:
            self.index = json.loads(self.index_file.read_text())
        except (OSError, json.JSONDecodeError) as e:
            logger.error("Failed to load reference cache index: %s", e)
            raise

    def _write_index(self) -> None:
        try:
            self.index_file.write_text(json.dumps(self.index, indent=2, sort_keys=True))
        except OSError as e:
            logger.error("Failed to write reference cache index: %s", e)
            raise

    def __contains__(self, key: str) -> bool:
        return key in self.index and (self.cache_dir / self.index[key]["file"]).exists()

    def load(self, key: str) -> Optional[Tuple[Dict[str, np.ndarray], Dict[str, Any]]]:
        """Arrays and metadata stored under `key`, or None"""
        if key not in self:
            return None
        entry = self.index[key]
        with np.load(self.cache_dir / entry["file"]) as data:
            arrays = {name: data[name] for name in data.files}
        logger.info("Loaded cached reference %s (%s)", key, entry.get("label", ""))
        return arrays, entry

    def store(self, key: str, arrays: Dict[str, np.ndarray], metadata: Dict[str, Any]) -> Path:
        """Write arrays under `key`; the index is updated by one writer at a time"""
        path = self.cache_dir / f"{key}.npz"
        with self._lock:
            np.savez(path, **arrays)
            self.index[key] = {**metadata, "file": path.name, "created_at": datetime.now().isoformat()}
            self._write_index()
        logger.info("Cached reference %s at %s", key, path)
        return path

    def remove(self, key: str) -> None:
        with self._lock:
            entry = self.index.pop(key, None)
            if entry is not None:
                (self.cache_dir / entry["file"]).unlink(missing_ok=True)
                self._write_index()
