"""Latency/energy accounting for media operations.

Totals are always derived from the operation counters, so charging is
additive and order-independent. Partial writes are charged pro-rata by
bytes / page_size of a full page write.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ParamMismatch, UnknownClass
from .memory import NvmKind

OP_CLASSES = ("page_reads", "page_writes", "partial_bytes_written", "block_erases", "mapping_updates")
INFINITE = "inf"


@dataclass(frozen=True)
class CostParams:
    """Per-operation costs. Latencies in ns, energies in nJ.

    The shipped defaults are illustrative placeholders, not part measurements.
    """

    kind: NvmKind = NvmKind.OVERWRITABLE
    read_latency: float = 100.0
    write_latency: float = 300.0
    erase_latency: float = 0.0
    read_energy: float = 5.0
    write_energy: float = 20.0
    erase_energy: float = 0.0
    mapping_latency: float = 10.0
    mapping_energy: float = 0.5

    def __post_init__(self):
        for name in ("read_latency", "write_latency", "erase_latency", "read_energy",
                     "write_energy", "erase_energy", "mapping_latency", "mapping_energy"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def illustrative(cls, kind: NvmKind):
        """Example parameters; flash erase is 10x a page program."""
        if kind is NvmKind.FLASH_LIKE:
            return cls(kind, read_latency=25_000.0, write_latency=200_000.0,
                       erase_latency=2_000_000.0, read_energy=50.0, write_energy=400.0,
                       erase_energy=4_000.0, mapping_latency=10.0, mapping_energy=0.5)
        return cls(kind)

    def with_updates(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "kind"}
        d["kind"] = self.kind.value
        return d


class CostLedger:
    def __init__(self, params: CostParams, page_size: int):
        self.params = params
        self.page_size = page_size
        self.counters = dict.fromkeys(OP_CLASSES, 0)

    def allowed(self, op_class):
        if op_class not in self.counters:
            return False
        return op_class != "block_erases" or self.params.kind is NvmKind.FLASH_LIKE

    def charge(self, op_class, amount=1):
        if not self.allowed(op_class):
            raise UnknownClass(f"{op_class!r} is not chargeable on {self.params.kind.value} media")
        if amount < 0:
            raise ValueError("amount must be non-negative")
        self.counters[op_class] += amount
        return self

    @property
    def latency_ns(self):
        p, c = self.params, self.counters
        return (c["page_reads"] * p.read_latency
                + c["page_writes"] * p.write_latency
                + c["partial_bytes_written"] * p.write_latency / self.page_size
                + c["block_erases"] * p.erase_latency
                + c["mapping_updates"] * p.mapping_latency)

    @property
    def energy_nj(self):
        p, c = self.params, self.counters
        return (c["page_reads"] * p.read_energy
                + c["page_writes"] * p.write_energy
                + c["partial_bytes_written"] * p.write_energy / self.page_size
                + c["block_erases"] * p.erase_energy
                + c["mapping_updates"] * p.mapping_energy)

    def _check_compatible(self, other):
        if self.params != other.params or self.page_size != other.page_size:
            raise ParamMismatch("ledgers use different cost parameters")

    def copy(self):
        out = CostLedger(self.params, self.page_size)
        out.counters = dict(self.counters)
        return out

    def merge(self, other: "CostLedger"):
        """Add another ledger's counters into this one (combining independent runs)."""
        self._check_compatible(other)
        for k, v in other.counters.items():
            self.counters[k] += v
        return self

    def since(self, snapshot: "CostLedger"):
        """Ledger slice covering everything charged after ``snapshot`` was taken."""
        self._check_compatible(snapshot)
        out = CostLedger(self.params, self.page_size)
        out.counters = {k: self.counters[k] - snapshot.counters[k] for k in OP_CLASSES}
        return out

    def as_dict(self):
        return {"counters": dict(self.counters), "latency_ns": self.latency_ns,
                "energy_nj": self.energy_nj}

    def __eq__(self, other):
        return (isinstance(other, CostLedger) and self.params == other.params
                and self.page_size == other.page_size and self.counters == other.counters)

    def __repr__(self):
        return f"CostLedger({self.counters}, latency_ns={self.latency_ns}, energy_nj={self.energy_nj})"


def _ratio(a, b):
    if b > 0:
        return a / b
    return INFINITE if a > 0 else None


def compare(a: CostLedger, b: CostLedger):
    """Per-dimension deltas (a - b) and ratios (a / b) for two ledgers.

    A ratio with zero denominator is reported as ``"inf"`` (or ``None`` for 0/0).
    """
    a._check_compatible(b)
    dims = dict(a.counters)
    dims["latency_ns"] = a.latency_ns
    dims["energy_nj"] = a.energy_nj
    other = dict(b.counters)
    other["latency_ns"] = b.latency_ns
    other["energy_nj"] = b.energy_nj
    return {k: {"a": dims[k], "b": other[k], "delta": dims[k] - other[k],
                "ratio": _ratio(dims[k], other[k])} for k in dims}
