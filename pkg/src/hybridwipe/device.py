"""NVM device behaviour for in-place over-writable media and out-of-place flash media."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cost import CostLedger, CostParams
from .errors import (BadLength, InsufficientHostData, MediumFull, NoSpareBlock,
                     WrongKind)
from .memory import (ERASED_BYTE, AllocPolicy, FrameState, MappingTable, Medium,
                     MediumGeometry, NvmKind, baseline_delete, dump_image)
from .rng import MASK64, splitmix64_bytes


@dataclass(frozen=True)
class HostSupplied:
    """Random bytes shipped by the host together with the overwrite request."""
    data: bytes


@dataclass(frozen=True)
class DeviceInternal:
    """Random bytes produced by the device's own SplitMix64 generator."""
    seed: int


RandomSource = Union[HostSupplied, DeviceInternal]


@dataclass(frozen=True)
class Full:
    def describe(self):
        return "full"


@dataclass(frozen=True)
class Partial:
    """Overwrite a fraction of each page.

    With ``stripes=None`` the leading ceil(fraction * page_size) bytes are
    replaced. With ``stripes=k`` the page is cut into k near-equal chunks
    and the leading ceil(fraction * chunk_len) bytes of each chunk are replaced.
    """
    fraction: Fraction
    stripes: Optional[int] = None

    def __post_init__(self):
        frac = self.fraction
        if isinstance(frac, float):
            frac = Fraction(repr(frac))
        frac = Fraction(frac)
        if not 0 < frac < 1:
            raise ValueError(f"partial fraction must lie strictly in (0, 1), got {frac}")
        if self.stripes is not None and (not isinstance(self.stripes, int) or self.stripes < 1):
            raise ValueError("stripes must be a positive integer")
        object.__setattr__(self, "fraction", frac)

    def describe(self):
        layout = "prefix" if self.stripes is None else f"stripes({self.stripes})"
        return f"partial({self.fraction},{layout})"


OverwriteMode = Union[Full, Partial]


def overwrite_spans(mode: OverwriteMode, page_size):
    """List of (offset, length) byte ranges a mode replaces within one page."""
    if isinstance(mode, Full):
        return [(0, page_size)]
    if mode.stripes is None:
        return [(0, math.ceil(mode.fraction * page_size))]
    base, extra = divmod(page_size, mode.stripes)
    spans, start = [], 0
    for i in range(mode.stripes):
        chunk = base + (1 if i < extra else 0)
        n = math.ceil(mode.fraction * chunk)
        if n:
            spans.append((start, n))
        start += chunk
    return spans


def generate_random_data(source: RandomSource, length):
    if length < 1:
        raise ValueError("length must be at least 1")
    if isinstance(source, HostSupplied):
        if len(source.data) < length:
            raise InsufficientHostData(
                f"host supplied {len(source.data)} bytes, overwrite needs {length}")
        return bytes(source.data[:length])
    return splitmix64_bytes(source.seed, length)


def frame_source(source: RandomSource, frame_id):
    """Per-frame source: device streams are reseeded with seed XOR frame_id."""
    if isinstance(source, DeviceInternal):
        return DeviceInternal((source.seed ^ frame_id) & MASK64)
    return source


class NvmDevice:
    """One NVM device: medium, mapping table and cost ledger.

    ``write`` updates in place on over-writable media and out of place on
    flash-like media. Garbage collection runs only when allocation fails and
    greedily erases the reclaimable block with the fewest valid pages
    (lowest block id on ties).
    """

    def __init__(self, kind: NvmKind, geometry: MediumGeometry,
                 params: Optional[CostParams] = None,
                 policy: AllocPolicy = AllocPolicy.FIRST_FREE):
        if params is None:
            params = CostParams.illustrative(kind)
        if params.kind is not kind:
            raise ValueError("cost parameters are for a different medium kind")
        self.kind = kind
        self.geometry = geometry
        self.policy = policy
        self.medium = Medium(geometry, kind)
        self.table = MappingTable()
        self.ledger = CostLedger(params, geometry.page_size)
        self.gc_runs = 0

    @property
    def flash_like(self):
        return self.kind is NvmKind.FLASH_LIKE

    def _check_length(self, data):
        if len(data) != self.geometry.page_size:
            raise BadLength(f"expected {self.geometry.page_size} bytes, got {len(data)}")

    def _charge_span(self, written):
        if written == self.geometry.page_size:
            self.ledger.charge("page_writes")
        elif written:
            self.ledger.charge("partial_bytes_written", written)

    # -- host data path -------------------------------------------------

    def write(self, logical_page, data, personal=False):
        """Persist a page; returns the frame now holding it."""
        if self.flash_like:
            return self.write_out_of_place(logical_page, data, personal)
        self._check_length(data)
        entry = self.table.lookup(logical_page)
        if entry is None:
            fid = self.medium.allocate(self.policy)
        else:
            fid = entry.frame_id
        self.medium.frames[fid].data[:] = data
        self.ledger.charge("page_writes")
        if entry is None or entry.personal != personal:
            self.table.map(logical_page, fid, personal)
            self.ledger.charge("mapping_updates")
        return fid

    def read(self, logical_page) -> Optional[bytes]:
        fid = self.table.translate(logical_page)
        if fid is None:
            return None
        self.ledger.charge("page_reads")
        return bytes(self.medium.frames[fid].data)

    def read_frame(self, frame_id) -> bytes:
        frame = self.medium.frame(frame_id)
        self.ledger.charge("page_reads")
        return bytes(frame.data)

    def baseline_delete(self, logical_page):
        outcome = baseline_delete(self.medium, self.table, logical_page)
        self.ledger.charge("mapping_updates")
        return outcome

    def dump_image(self):
        return dump_image(self.medium)

    # -- flash FTL ------------------------------------------------------

    def _allocate_flash(self):
        try:
            return self.medium.allocate(self.policy)
        except MediumFull:
            self.garbage_collect()
            return self.medium.allocate(self.policy)

    def write_out_of_place(self, logical_page, data, personal=False):
        if not self.flash_like:
            raise WrongKind("out-of-place writes need a flash-like device")
        self._check_length(data)
        fid = self._allocate_flash()
        frame = self.medium.frames[fid]
        # programming can only clear bits of an erased page
        frame.data[:] = bytes(a & b for a, b in zip(frame.data, data))
        previous = self.table.map(logical_page, fid, personal)
        if previous is not None:
            self.medium.frames[previous.frame_id].state = FrameState.STALE
            self.table.add_stale(previous.frame_id, logical_page, previous.personal)
        self.ledger.charge("page_writes")
        self.ledger.charge("mapping_updates")
        return fid

    def block_usage(self, block_id):
        """(valid, stale, free) frame counts of a block."""
        counts = {s: 0 for s in FrameState}
        for fid in self.medium.block_frames(block_id):
            counts[self.medium.frames[fid].state] += 1
        return counts[FrameState.LIVE], counts[FrameState.STALE], counts[FrameState.FREE]

    def garbage_collect(self):
        """Erase one reclaimable block; returns its id."""
        candidates = []
        for block_id in range(self.geometry.block_count):
            valid, stale, _ = self.block_usage(block_id)
            if stale:
                candidates.append((valid, block_id))
        if not candidates:
            raise MediumFull("no free frame and no reclaimable block")
        _, victim = min(candidates)
        try:
            self.erase_block(victim)
        except NoSpareBlock as exc:
            raise MediumFull(f"garbage collection cannot relocate block {victim}") from exc
        self.gc_runs += 1
        return victim

    def erase_block(self, block_id):
        """Relocate still-valid pages out of the block, then erase it.

        Returns the number of relocated pages.
        """
        if not self.flash_like:
            raise WrongKind("block erase needs a flash-like device")
        frames = self.medium.block_frames(block_id)
        movers = [self.table.owner_of(fid) for fid in frames
                  if self.medium.frames[fid].state is FrameState.LIVE]
        movers = [e for e in movers if e is not None]
        spare = sum(1 for f in self.medium.frames
                    if f.state is FrameState.FREE and self.medium.block_of(f.frame_id) != block_id)
        if spare < len(movers):
            raise NoSpareBlock(
                f"block {block_id} has {len(movers)} valid pages but only {spare} free frames elsewhere")
        for entry in movers:
            data = bytes(self.medium.frames[entry.frame_id].data)
            fid = self.medium.allocate(self.policy, exclude_block=block_id)
            self.medium.frames[fid].data[:] = data
            self.table.map(entry.logical_page, fid, entry.personal)
            self.ledger.charge("page_reads")
            self.ledger.charge("page_writes")
            self.ledger.charge("mapping_updates")
        for fid in frames:
            frame = self.medium.frames[fid]
            frame.data[:] = bytes([ERASED_BYTE]) * self.geometry.page_size
            frame.state = FrameState.FREE
            frame.erase_count += 1
        self.table.drop_stale(frames)
        self.ledger.charge("block_erases")
        return len(movers)

    def sanitize_by_erase(self, logical_pages):
        """Erase-based deletion: unmap the pages, then erase every block holding a copy.

        This is the expensive complete path that targeted overwrite avoids.
        Returns (erased block ids, relocations).
        """
        if not self.flash_like:
            raise WrongKind("erase-based sanitization needs a flash-like device")
        pages = set(logical_pages)
        for page in sorted(pages):
            if self.table.lookup(page) is not None:
                self.baseline_delete(page)
        blocks = sorted({self.medium.block_of(r.frame_id)
                         for r in self.table.stale_index.values() if r.logical_page in pages})
        relocations = sum(self.erase_block(b) for b in blocks)
        return blocks, relocations

    # -- sanitization primitives ----------------------------------------

    def overwrite_in_place(self, frame_id, mode: OverwriteMode, source: RandomSource):
        """Replace the mode's span of a frame with random data; returns bytes written.

        Frame state is left alone, so Live, Free or any frame may be sanitized.
        """
        if self.flash_like:
            raise WrongKind("flash-like media cannot be overwritten in place; use program_clear")
        frame = self.medium.frame(frame_id)
        spans = overwrite_spans(mode, self.geometry.page_size)
        total = sum(n for _, n in spans)
        if not total:
            return 0
        random_data = generate_random_data(frame_source(source, frame_id), total)
        pos = 0
        for start, n in spans:
            frame.data[start:start + n] = random_data[pos:pos + n]
            pos += n
        self._charge_span(total)
        return total

    def program_clear(self, frame_id, mode: OverwriteMode):
        """Clear every bit in the mode's span (flash can only program 1 -> 0)."""
        if not self.flash_like:
            raise WrongKind("program_clear is for flash-like media; use overwrite_in_place")
        frame = self.medium.frame(frame_id)
        total = 0
        for start, n in overwrite_spans(mode, self.geometry.page_size):
            frame.data[start:start + n] = bytes(n)
            total += n
        self._charge_span(total)
        return total

    def sanitize_frame(self, frame_id, mode: OverwriteMode, source: RandomSource):
        """Kind-appropriate in-place sanitization of one frame."""
        if self.flash_like:
            return self.program_clear(frame_id, mode)
        return self.overwrite_in_place(frame_id, mode, source)
