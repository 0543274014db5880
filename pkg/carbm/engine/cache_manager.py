"""
Decomposition Cache.

Persistent JSON cache for Cartan decompositions:
- SHA-256 of the canonical Hamiltonian (coefficients rounded to 1e-12)
  plus the Cartan subalgebra basis as cache key
- One JSON file per key under <cache_dir>/<key[:2]>/<key>.json
- Writes go to a temporary file and are moved into place with an atomic
  replace, so concurrent writers are last-wins and readers never see a
  partial file
- Corrupt entries are reported as misses with a warning
- Hit/miss/write statistics
"""

import hashlib
import json
import logging
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

logger = logging.getLogger(__name__)

KEY_ROUNDING = 12  # decimal places of coefficients entering the key
CACHE_FORMAT_VERSION = 1


@dataclass
class CacheConfig:
    """Cache configuration."""
    cache_dir: str = ".carbm_cache"
    enabled: bool = True


@dataclass
class CacheStats:
    """Cache statistics."""
    hits: int = 0
    misses: int = 0
    corrupt: int = 0
    writes: int = 0

    @property
    def total_requests(self) -> int:
        return self.hits + self.misses

    @property
    def hit_rate(self) -> float:
        if self.total_requests == 0:
            return 0.0
        return self.hits / self.total_requests


def hamiltonian_hash(records: Sequence[Sequence[Any]], csa_basis: Iterable[str]) -> str:
    """
    Canonical key for a Hamiltonian and a Cartan subalgebra.

    Args:
        records: [[pauli_text, coefficient], ...]
        csa_basis: Pauli texts of the subalgebra basis, in order

    Returns:
        Hex digest
    """
    terms = sorted(
        (text, round(float(coeff), KEY_ROUNDING) + 0.0) for text, coeff in records
    )
    payload = json.dumps(
        {"terms": terms, "csa": list(csa_basis), "version": CACHE_FORMAT_VERSION},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class CacheManager:
    """
    JSON disk cache for decomposition results.

    Usage:
        cache = CacheManager(CacheConfig(cache_dir="/tmp/carbm"))

        key = hamiltonian_hash(H.to_records(), [p.to_text() for p in csa.basis])
        entry = cache.get(key)

        if entry is None:
            entry = compute(...)
            cache.put(key, entry)
    """

    def __init__(self, config: Optional[CacheConfig] = None):
        self.config = config or CacheConfig()
        self.stats = CacheStats()
        self._lock = threading.Lock()
        self._cache_dir = Path(self.config.cache_dir)

        if self.config.enabled:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

        logger.info(
            f"CacheManager initialized: dir={self._cache_dir}, enabled={self.config.enabled}"
        )

    @property
    def cache_dir(self) -> Path:
        return self._cache_dir

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        """
        Read a cached entry.

        Returns:
            The stored dict, or None on miss, when disabled, or when the file
            cannot be parsed (counted as corrupt).
        """
        if not self.config.enabled:
            return None

        path = self._get_disk_path(key)
        if not path.exists():
            self._count("misses")
            logger.debug(f"Cache MISS: {key[:16]}...")
            return None

        try:
            with open(path, "r", encoding="utf-8") as f:
                entry = json.load(f)
            if not isinstance(entry, dict) or entry.get("hamiltonian_hash") != key:
                raise ValueError("entry does not match its key")
        except (OSError, ValueError) as e:
            self.mark_corrupt(key, str(e))
            return None

        self._count("hits")
        logger.debug(f"Cache HIT: {key[:16]}...")
        return entry

    def put(self, key: str, entry: Dict[str, Any]) -> Optional[Path]:
        """
        Write an entry with an atomic replace.

        Returns:
            Path written, or None when disabled or the write failed.
        """
        if not self.config.enabled:
            return None

        entry = dict(entry)
        entry["hamiltonian_hash"] = key
        path = self._get_disk_path(key)
        try:
            fd, tmp_name = tempfile.mkstemp(
                dir=str(path.parent), prefix=f".{key[:8]}.", suffix=".tmp"
            )
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(entry, f, sort_keys=True, indent=1)
            os.replace(tmp_name, path)
        except OSError as e:
            logger.warning(f"Cache write failed for {key[:16]}...: {e}")
            return None

        self._count("writes")
        logger.debug(f"Cached decomposition: {key[:16]}...")
        return path

    def mark_corrupt(self, key: str, reason: str) -> None:
        """Record a corrupt entry; the caller recomputes."""
        self._count("corrupt")
        self._count("misses")
        logger.warning(f"Corrupt cache entry {key[:16]}... ({reason}); recomputing")

    def invalidate(self, key: str) -> None:
        path = self._get_disk_path(key)
        if path.exists():
            path.unlink()
        logger.debug(f"Invalidated cache: {key[:16]}...")

    def clear_all(self) -> int:
        """
        Remove all cache files.

        Returns:
            Number of entries removed
        """
        count = 0
        if self._cache_dir.exists():
            for cache_file in self._cache_dir.glob("*/*.json"):
                cache_file.unlink()
                count += 1
        logger.info(f"Cleared {count} cache entries")
        return count

    def keys(self) -> List[str]:
        if not self._cache_dir.exists():
            return []
        return sorted(p.stem for p in self._cache_dir.glob("*/*.json"))

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        return {
            "hits": self.stats.hits,
            "misses": self.stats.misses,
            "corrupt": self.stats.corrupt,
            "writes": self.stats.writes,
            "total_requests": self.stats.total_requests,
            "hit_rate": f"{self.stats.hit_rate:.1%}",
            "entries": len(self.keys()),
        }

    # =========================================================================
    # Private Methods
    # =========================================================================

    def _count(self, name: str) -> None:
        with self._lock:
            setattr(self.stats, name, getattr(self.stats, name) + 1)

    def _get_disk_path(self, key: str) -> Path:
        """Get disk cache file path."""
        # First 2 chars as subdirectory
        subdir = self._cache_dir / key[:2]
        subdir.mkdir(parents=True, exist_ok=True)
        return subdir / f"{key}.json"


# Cache managers per directory
_cache_managers: Dict[str, CacheManager] = {}
_registry_lock = threading.Lock()


def get_cache_manager(cache_dir: Optional[str] = None, enabled: bool = True) -> CacheManager:
    """
    Get or create the shared cache manager for a directory.

    Args:
        cache_dir: Directory; defaults to settings (CARBM_CACHE_DIR)

    Returns:
        Shared CacheManager instance
    """
    if cache_dir is None:
        from carbm.core.config import get_settings
        settings = get_settings()
        cache_dir = settings.cache.dir
        enabled = enabled and settings.cache.enabled

    resolved = str(Path(cache_dir).expanduser().resolve())
    with _registry_lock:
        manager = _cache_managers.get(resolved)
        if manager is None or manager.config.enabled != enabled:
            manager = CacheManager(CacheConfig(cache_dir=resolved, enabled=enabled))
            _cache_managers[resolved] = manager
    return manager
