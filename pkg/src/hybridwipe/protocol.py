"""Privacy-protection deletion: request -> search -> overwrite -> verify -> completion."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from .cost import CostLedger
from .device import DeviceInternal, Full, NvmDevice, OverwriteMode, RandomSource
from .errors import SimulationError
from .forensics import match_frames
from .memory import MappingTable, Medium, baseline_delete

DEFAULT_WINDOW = 16


class TargetOrigin(Enum):
    VALID = "valid"
    INVALID = "invalid"


@dataclass(frozen=True)
class ByLogicalPage:
    page: int


@dataclass(frozen=True)
class ByPersonalTag:
    pass


@dataclass(frozen=True)
class DeletionRequest:
    request_id: int
    target: Union[ByLogicalPage, ByPersonalTag]
    mode: OverwriteMode = Full()
    source: RandomSource = DeviceInternal(0)
    verify_window: int = DEFAULT_WINDOW


class ProtocolState(Enum):
    RECEIVED = "received"
    SEARCHING = "searching"
    OVERWRITING = "overwriting"
    VERIFYING = "verifying"
    COMPLETED = "completed"
    FAILED = "failed"


_NEXT = {
    ProtocolState.RECEIVED: {ProtocolState.SEARCHING},
    ProtocolState.SEARCHING: {ProtocolState.OVERWRITING},
    ProtocolState.OVERWRITING: {ProtocolState.VERIFYING},
    ProtocolState.VERIFYING: {ProtocolState.COMPLETED, ProtocolState.FAILED},
    ProtocolState.COMPLETED: set(),
    ProtocolState.FAILED: set(),
}


class CompletionStatus(Enum):
    DELETED = "deleted"
    RESIDUE_FOUND = "residue_found"
    ERROR = "error"


@dataclass(frozen=True)
class Target:
    frame_id: int
    origin: TargetOrigin
    logical_page: int


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    bytes_written: int
    error: Optional[str] = None


@dataclass(frozen=True)
class Verdict:
    fragments: tuple = ()

    @property
    def absent(self):
        return not self.fragments


@dataclass
class DeletionCompletion:
    request_id: int
    status: CompletionStatus
    frames_sanitized: int
    residue_fragments: int
    cost: CostLedger
    states: list = field(default_factory=list)
    reason: Optional[str] = None
    pages: tuple = ()

    def as_dict(self):
        return {
            "request_id": self.request_id,
            "status": self.status.value,
            "frames_sanitized": self.frames_sanitized,
            "residue_fragments": self.residue_fragments,
            "reason": self.reason,
            "pages": list(self.pages),
            "states": [s.value for s in self.states],
            "cost": self.cost.as_dict(),
        }


def search_targets(table: MappingTable, request: DeletionRequest):
    """Frames holding the requested data: live copies (Valid) and stale copies (Invalid)."""
    target = request.target
    found = []
    for entry in table.valid_entries():
        if (entry.logical_page == target.page if isinstance(target, ByLogicalPage)
                else entry.personal):
            found.append(Target(entry.frame_id, TargetOrigin.VALID, entry.logical_page))
    for rec in table.stale_index.values():
        if rec.sanitized:
            continue
        if (rec.logical_page == target.page if isinstance(target, ByLogicalPage)
                else rec.personal):
            found.append(Target(rec.frame_id, TargetOrigin.INVALID, rec.logical_page))
    return sorted(found, key=lambda t: t.frame_id)


def execute_overwrite(device: NvmDevice, targets, mode: OverwriteMode, source: RandomSource):
    results = []
    for t in targets:
        try:
            results.append(FrameResult(t.frame_id, device.sanitize_frame(t.frame_id, mode, source)))
        except SimulationError as exc:
            results.append(FrameResult(t.frame_id, 0, f"{type(exc).__name__}: {exc}"))
    return results


def _payload_pairs(original_payloads):
    if isinstance(original_payloads, Mapping):
        for page, value in original_payloads.items():
            versions = [value] if isinstance(value, (bytes, bytearray)) else value
            for data in versions:
                yield page, bytes(data)
    else:
        for page, data in original_payloads:
            yield page, bytes(data)


def verify_absence(medium: Medium, original_payloads, targets, verify_window=DEFAULT_WINDOW):
    """Look for any ``verify_window``-byte run of an original payload inside the targeted frames.

    ``original_payloads`` is either a mapping page -> bytes (or list of
    versions) or an iterable of (page, bytes). The originals are simulator
    ground truth; a real device would have nothing to compare against.
    """
    frame_ids = sorted({t.frame_id for t in targets})
    if not frame_ids:
        return Verdict()
    rows = np.frombuffer(b"".join(bytes(medium.frame(f).data) for f in frame_ids), dtype=np.uint8)
    rows = rows.reshape(len(frame_ids), medium.geometry.page_size)
    fragments = match_frames(rows, frame_ids, _payload_pairs(original_payloads), verify_window)
    return Verdict(tuple(fragments))


class PrivacyProtocol:
    """Serial request processor bound to one device."""

    def __init__(self, device: NvmDevice):
        self.device = device
        self.used_ids = set()

    def run(self, request: DeletionRequest, original_payloads) -> DeletionCompletion:
        if request.request_id in self.used_ids:
            raise ValueError(f"request id {request.request_id} already used")
        if not 1 <= request.verify_window <= self.device.geometry.page_size:
            raise ValueError("verify_window must lie in [1, page_size]")
        self.used_ids.add(request.request_id)
        device = self.device
        before = device.ledger.copy()
        states = [ProtocolState.RECEIVED]

        def advance(state):
            assert state in _NEXT[states[-1]], f"illegal transition {states[-1]} -> {state}"
            states.append(state)

        advance(ProtocolState.SEARCHING)
        targets = search_targets(device.table, request)
        pages = {t.logical_page for t in targets}
        originals = [(p, d) for p, d in _payload_pairs(original_payloads) if p in pages]

        advance(ProtocolState.OVERWRITING)
        results = execute_overwrite(device, targets, request.mode, request.source)
        errors = [r.error for r in results if r.error]

        advance(ProtocolState.VERIFYING)
        device.ledger.charge("page_reads", len(targets))
        verdict = verify_absence(device.medium, originals, targets, request.verify_window)

        sanitized = sum(1 for r in results if not r.error)
        if errors:
            advance(ProtocolState.FAILED)
            status, reason = CompletionStatus.ERROR, "; ".join(errors)
        elif not verdict.absent:
            advance(ProtocolState.FAILED)
            status = CompletionStatus.RESIDUE_FOUND
            reason = f"{len(verdict.fragments)} residual fragments"
        else:
            self._retire(targets)
            advance(ProtocolState.COMPLETED)
            status, reason = CompletionStatus.DELETED, None
        return DeletionCompletion(request.request_id, status, sanitized, len(verdict.fragments),
                                  device.ledger.since(before), states, reason,
                                  tuple(sorted(pages)))

    def _retire(self, targets):
        """Unmap sanitized live copies and mark sanitized stale copies as handled."""
        device = self.device
        for t in targets:
            if t.origin is TargetOrigin.VALID:
                baseline_delete(device.medium, device.table, t.logical_page)
            rec = device.table.stale_index.get(t.frame_id)
            if rec is not None:
                rec.sanitized = True
                rec.personal = False
            device.ledger.charge("mapping_updates")


def run_protocol(device: NvmDevice, request: DeletionRequest, original_payloads,
                 protocol: Optional[PrivacyProtocol] = None) -> DeletionCompletion:
    if protocol is None:
        protocol = PrivacyProtocol(device)
    return protocol.run(request, original_payloads)
