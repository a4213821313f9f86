"""Write-back DRAM page cache in front of an NVM device.

Dirty pages are flushed once they have been idle for ``idle_timeout`` ticks
(inclusive), or when evicted by LRU replacement.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

from .errors import BadLength


@dataclass(frozen=True)
class CacheConfig:
    capacity: int
    idle_timeout: int
    eviction: str = "lru"

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.idle_timeout < 1:
            raise ValueError("idle_timeout must be at least 1")
        if self.eviction != "lru":
            raise ValueError(f"unsupported eviction policy {self.eviction!r}")


@dataclass
class CacheEntry:
    logical_page: int
    data: bytes
    dirty: bool
    personal: bool
    last_access: int


@dataclass(frozen=True)
class ReadResult:
    data: bytes
    hit: bool
    backed: bool = True


class DramCache:
    def __init__(self, config: CacheConfig, device):
        self.config = config
        self.device = device
        self.page_size = device.geometry.page_size
        # least recently used first
        self.entries: "OrderedDict[int, CacheEntry]" = OrderedDict()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, logical_page):
        return logical_page in self.entries

    def _write_back(self, entry):
        self.device.write(entry.logical_page, entry.data, entry.personal)
        entry.dirty = False

    def _make_room(self):
        while len(self.entries) >= self.config.capacity:
            _, victim = self.entries.popitem(last=False)
            if victim.dirty:
                self._write_back(victim)

    def access_write(self, logical_page, data, personal, now):
        if len(data) != self.page_size:
            raise BadLength(f"expected {self.page_size} bytes, got {len(data)}")
        entry = self.entries.get(logical_page)
        if entry is None:
            self._make_room()
            entry = CacheEntry(logical_page, bytes(data), True, personal, now)
            self.entries[logical_page] = entry
        else:
            entry.data = bytes(data)
            entry.dirty = True
            entry.personal = personal
            entry.last_access = now
            self.entries.move_to_end(logical_page)
        return entry

    def access_read(self, logical_page, now) -> ReadResult:
        entry = self.entries.get(logical_page)
        if entry is not None:
            entry.last_access = now
            self.entries.move_to_end(logical_page)
            return ReadResult(entry.data, hit=True)
        data = self.device.read(logical_page)
        if data is None:
            return ReadResult(bytes(self.page_size), hit=False, backed=False)
        mapping = self.device.table.lookup(logical_page)
        self._make_room()
        self.entries[logical_page] = CacheEntry(logical_page, data, False, mapping.personal, now)
        return ReadResult(data, hit=False)

    def tick_flush(self, now):
        """Write back every dirty page idle for at least ``idle_timeout``; returns pages, ascending."""
        due = sorted(e.logical_page for e in self.entries.values()
                     if e.dirty and now - e.last_access >= self.config.idle_timeout)
        for page in due:
            self._write_back(self.entries[page])
        return due

    def flush_all(self):
        due = sorted(p for p, e in self.entries.items() if e.dirty)
        for page in due:
            self._write_back(self.entries[page])
        return due

    def next_flush_due(self):
        """Earliest tick at which some dirty page becomes idle enough to flush, or None."""
        times = [e.last_access + self.config.idle_timeout for e in self.entries.values() if e.dirty]
        return min(times) if times else None

    def discard(self, logical_page):
        """Drop a page without write-back (DRAM contents vanish); returns the entry or None."""
        return self.entries.pop(logical_page, None)

    def discard_personal(self):
        pages = sorted(p for p, e in self.entries.items() if e.personal)
        for page in pages:
            del self.entries[page]
        return pages
