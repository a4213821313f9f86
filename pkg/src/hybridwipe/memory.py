"""Physical NVM medium (frames, geometry) and the logical-to-physical mapping table."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import BadFrame, IoFailure, MediumFull, NotMapped

ERASED_BYTE = 0xFF


class NvmKind(Enum):
    OVERWRITABLE = "overwritable"
    FLASH_LIKE = "flash"


class FrameState(Enum):
    FREE = "free"
    LIVE = "live"
    STALE = "stale"


class AllocPolicy(Enum):
    FIRST_FREE = "first_free"
    ROUND_ROBIN = "round_robin"


@dataclass(frozen=True)
class MediumGeometry:
    frame_count: int
    page_size: int = 4096
    block_size: int = 64

    def __post_init__(self):
        for name in ("frame_count", "page_size", "block_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.frame_count % self.block_size:
            raise ValueError(
                f"block_size {self.block_size} does not divide frame_count {self.frame_count}"
            )

    @property
    def block_count(self):
        return self.frame_count // self.block_size

    @property
    def image_size(self):
        return self.frame_count * self.page_size

    def as_dict(self):
        return {
            "page_size": self.page_size,
            "frame_count": self.frame_count,
            "block_size": self.block_size,
        }


@dataclass
class PhysicalFrame:
    frame_id: int
    data: bytearray
    state: FrameState = FrameState.FREE
    erase_count: int = 0


class Medium:
    """Array of physical frames.

    Flash-like media start erased (0xFF); over-writable media start zeroed.
    Freed frames on over-writable media keep their bytes.
    """

    def __init__(self, geometry: MediumGeometry, kind: NvmKind):
        self.geometry = geometry
        self.kind = kind
        fill = ERASED_BYTE if kind is NvmKind.FLASH_LIKE else 0x00
        self.frames = [
            PhysicalFrame(i, bytearray([fill]) * geometry.page_size)
            for i in range(geometry.frame_count)
        ]
        self._cursor = 0

    @property
    def flash_like(self):
        return self.kind is NvmKind.FLASH_LIKE

    def frame(self, frame_id) -> PhysicalFrame:
        if not 0 <= frame_id < self.geometry.frame_count:
            raise BadFrame(f"frame {frame_id} out of range [0, {self.geometry.frame_count})")
        return self.frames[frame_id]

    def block_of(self, frame_id):
        return frame_id // self.geometry.block_size

    def block_frames(self, block_id):
        if not 0 <= block_id < self.geometry.block_count:
            raise BadFrame(f"block {block_id} out of range")
        start = block_id * self.geometry.block_size
        return range(start, start + self.geometry.block_size)

    def frames_in(self, state):
        return [f.frame_id for f in self.frames if f.state is state]

    def allocate(self, policy=AllocPolicy.FIRST_FREE, exclude_block=None):
        """Mark a Free frame Live and return its id; the mapping is the caller's job."""
        n = self.geometry.frame_count
        start = self._cursor if policy is AllocPolicy.ROUND_ROBIN else 0
        for step in range(n):
            fid = (start + step) % n
            frame = self.frames[fid]
            if frame.state is not FrameState.FREE:
                continue
            if exclude_block is not None and self.block_of(fid) == exclude_block:
                continue
            frame.state = FrameState.LIVE
            self._cursor = (fid + 1) % n
            return fid
        raise MediumFull("no free frame")

    def image(self) -> bytes:
        return b"".join(bytes(f.data) for f in self.frames)

    def metadata(self):
        return {
            "geometry": self.geometry.as_dict(),
            "kind": self.kind.value,
            "frames": [
                {"id": f.frame_id, "state": f.state.value, "erase_count": f.erase_count}
                for f in self.frames
            ],
        }


def dump_image(medium: Medium):
    """Raw image (frames concatenated in id order) plus sidecar metadata; a pure read."""
    return medium.image(), medium.metadata()


def write_image(medium: Medium, image_path, meta_path=None):
    image, meta = dump_image(medium)
    if meta_path is None:
        meta_path = os.path.splitext(os.fspath(image_path))[0] + ".meta.json"
    try:
        with open(image_path, "wb") as fh:
            fh.write(image)
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return image_path, meta_path


def read_image(image_path, meta_path=None):
    """Load an image written by :func:`write_image`; returns (bytes, geometry, metadata)."""
    if meta_path is None:
        meta_path = os.path.splitext(os.fspath(image_path))[0] + ".meta.json"
    try:
        with open(image_path, "rb") as fh:
            image = fh.read()
        with open(meta_path) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    geometry = MediumGeometry(**meta["geometry"])
    return image, geometry, meta


@dataclass
class MappingEntry:
    logical_page: int
    frame_id: int
    personal: bool = False
    valid: bool = True


@dataclass
class StaleRecord:
    frame_id: int
    logical_page: int
    personal: bool
    # set once the privacy protocol has sanitized the frame; it stays Stale until erased
    sanitized: bool = False


@dataclass
class MappingTable:
    entries: dict = field(default_factory=dict)
    stale_index: dict = field(default_factory=dict)

    def translate(self, logical_page) -> Optional[int]:
        entry = self.entries.get(logical_page)
        if entry is None or not entry.valid:
            return None
        return entry.frame_id

    def lookup(self, logical_page) -> Optional[MappingEntry]:
        entry = self.entries.get(logical_page)
        return entry if entry is not None and entry.valid else None

    def map(self, logical_page, frame_id, personal):
        """Point ``logical_page`` at ``frame_id``; returns the entry it supersedes, if any."""
        previous = self.lookup(logical_page)
        self.entries[logical_page] = MappingEntry(logical_page, frame_id, personal)
        return previous

    def invalidate(self, logical_page) -> MappingEntry:
        entry = self.lookup(logical_page)
        if entry is None:
            raise NotMapped(f"logical page {logical_page} has no valid mapping")
        entry.valid = False
        return entry

    def valid_entries(self):
        return sorted(
            (e for e in self.entries.values() if e.valid), key=lambda e: e.logical_page
        )

    def owner_of(self, frame_id) -> Optional[MappingEntry]:
        for entry in self.entries.values():
            if entry.valid and entry.frame_id == frame_id:
                return entry
        return None

    def add_stale(self, frame_id, logical_page, personal):
        self.stale_index[frame_id] = StaleRecord(frame_id, logical_page, personal)

    def drop_stale(self, frame_ids):
        for fid in frame_ids:
            self.stale_index.pop(fid, None)


@dataclass(frozen=True)
class DeleteOutcome:
    logical_page: int
    frame_id: int
    state: FrameState


def baseline_delete(medium: Medium, table: MappingTable, logical_page) -> DeleteOutcome:
    """Unmap a page without touching its bytes.

    Over-writable media free the frame; flash-like media mark it Stale and
    record it in the stale index.
    """
    entry = table.invalidate(logical_page)
    frame = medium.frame(entry.frame_id)
    if medium.flash_like:
        frame.state = FrameState.STALE
        table.add_stale(frame.frame_id, logical_page, entry.personal)
    else:
        frame.state = FrameState.FREE
    return DeleteOutcome(logical_page, frame.frame_id, frame.state)


def audit(medium: Medium, table: MappingTable):
    """Return a list of structural invariant violations (empty when consistent)."""
    problems = []
    seen = {}
    for entry in table.valid_entries():
        if entry.frame_id in seen:
            problems.append(
                f"frame {entry.frame_id} shared by pages {seen[entry.frame_id]} and {entry.logical_page}"
            )
        seen[entry.frame_id] = entry.logical_page
        if medium.frame(entry.frame_id).state is not FrameState.LIVE:
            problems.append(f"page {entry.logical_page} maps to non-Live frame {entry.frame_id}")
    stale = set(medium.frames_in(FrameState.STALE))
    if stale != set(table.stale_index):
        problems.append(f"stale index {sorted(table.stale_index)} != Stale frames {sorted(stale)}")
    if stale and not medium.flash_like:
        problems.append("over-writable medium holds Stale frames")
    live = set(medium.frames_in(FrameState.LIVE))
    if live != set(seen):
        problems.append(f"Live frames {sorted(live - set(seen))} have no valid mapping")
    page_size = medium.geometry.page_size
    for f in medium.frames:
        if len(f.data) != page_size:
            problems.append(f"frame {f.frame_id} has {len(f.data)} bytes")
        if medium.flash_like and f.state is FrameState.FREE and any(b != ERASED_BYTE for b in f.data):
            problems.append(f"free flash frame {f.frame_id} is not erased")
    return problems
