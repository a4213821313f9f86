"""Scenario assembly and deterministic trace replay.

Trace format: JSON Lines, one object per line. Blank lines and lines whose
first non-space character is ``#`` are skipped.

    {"t": 0, "op": "write", "page": 5, "seed": 7, "personal": true}
    {"t": 3, "op": "read", "page": 5}
    {"t": 9, "op": "baseline_delete", "page": 5}
    {"t": 9, "op": "privacy_delete", "page": 5, "mode": "partial",
     "fraction": "1/4", "stripes": 2, "source": {"host_seed": 11}}
    {"t": 12, "op": "privacy_delete", "target": "personal"}

A write's payload is the first page_size bytes of the SplitMix64 stream of
its ``seed``. ``mode`` defaults to ``"full"``. ``source`` is ``"device"``
(default; seeded from the master seed and request id), ``{"device_seed": n}``,
``{"host_seed": n}`` or ``{"host_hex": "..."}``.

Config format (INI):

    [geometry]   page_size, frame_count, block_size
    [cache]      capacity, idle_timeout
    [device]     kind = overwritable | flash, allocation = first_free | round_robin
    [cost]       any CostParams field; omitted fields use the illustrative defaults
    [scan]       window
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .cache import CacheConfig, DramCache
from .cost import CostLedger, CostParams, compare
from .device import DeviceInternal, Full, HostSupplied, NvmDevice, Partial
from .errors import ConfigError, OrderError, ParseError, SimulationError, UnsupportedFormat
from .forensics import scan_medium
from .memory import AllocPolicy, MediumGeometry, NvmKind
from .protocol import (ByLogicalPage, ByPersonalTag, CompletionStatus, DeletionRequest,
                       PrivacyProtocol, DEFAULT_WINDOW)
from .rng import MASK64, derive_seed, splitmix64_bytes

CSV_FIELDS = (
    "scenario", "kind", "page_size", "frame_count", "records", "completions",
    "deleted", "residue_found", "errors", "deleted_pages_total",
    "deleted_pages_recoverable", "remanence_rate", "latency_ns", "energy_nj",
    "baseline_latency_ns", "policy_latency_ns",
)


class TraceOp(Enum):
    READ = "read"
    WRITE = "write"
    BASELINE_DELETE = "baseline_delete"
    PRIVACY_DELETE = "privacy_delete"


@dataclass(frozen=True)
class TraceRecord:
    t: int
    op: TraceOp
    page: Optional[int] = None
    seed: int = 0
    personal: bool = False
    mode: object = Full()
    source: object = "device"
    window: Optional[int] = None
    line: int = 0


@dataclass(frozen=True)
class Scenario:
    geometry: MediumGeometry
    cache: CacheConfig
    kind: NvmKind
    params: CostParams
    window: int = DEFAULT_WINDOW
    master_seed: int = 0
    allocation: AllocPolicy = AllocPolicy.FIRST_FREE
    name: str = "scenario"

    def as_dict(self):
        return {
            "name": self.name,
            "geometry": self.geometry.as_dict(),
            "cache": {"capacity": self.cache.capacity, "idle_timeout": self.cache.idle_timeout,
                      "eviction": self.cache.eviction},
            "kind": self.kind.value,
            "allocation": self.allocation.value,
            "cost_params": self.params.as_dict(),
            "window": self.window,
            "master_seed": self.master_seed,
        }


class SimulationAborted(SimulationError):
    """Runtime failure while replaying a trace; ``partial`` holds the state reached so far."""

    def __init__(self, record, cause, partial):
        self.record = record
        self.cause = cause
        self.partial = partial
        super().__init__(f"trace line {record.line} ({record.op.value}): "
                         f"{type(cause).__name__}: {cause}")


# -- config -----------------------------------------------------------------

_KINDS = {"overwritable": NvmKind.OVERWRITABLE, "flash": NvmKind.FLASH_LIKE,
          "flash_like": NvmKind.FLASH_LIKE}


def parse_config(text, master_seed=0, name="scenario") -> Scenario:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
        geo = cp["geometry"] if cp.has_section("geometry") else {}
        geometry = MediumGeometry(
            frame_count=int(geo["frame_count"]),
            page_size=int(geo.get("page_size", 4096)),
            block_size=int(geo.get("block_size", 64)),
        )
        cache = cp["cache"] if cp.has_section("cache") else {}
        cache_cfg = CacheConfig(int(cache.get("capacity", 16)), int(cache.get("idle_timeout", 5)),
                                cache.get("eviction", "lru"))
        dev = cp["device"] if cp.has_section("device") else {}
        kind = _KINDS[dev.get("kind", "overwritable").strip().lower()]
        allocation = AllocPolicy(dev.get("allocation", "first_free").strip().lower())
        params = CostParams.illustrative(kind)
        if cp.has_section("cost"):
            overrides = {k: float(v) for k, v in cp["cost"].items()}
            unknown = set(overrides) - set(params.__dataclass_fields__) | ({"kind"} & set(overrides))
            if unknown:
                raise ConfigError(f"unknown cost keys: {sorted(unknown)}")
            params = params.with_updates(**overrides)
        window = int(cp["scan"].get("window", DEFAULT_WINDOW)) if cp.has_section("scan") else DEFAULT_WINDOW
        if not 1 <= window <= geometry.page_size:
            raise ConfigError("scan window must lie in [1, page_size]")
    except ConfigError:
        raise
    except (configparser.Error, KeyError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    return Scenario(geometry, cache_cfg, kind, params, window, master_seed & MASK64,
                    allocation, name)


def load_config(path, master_seed=0):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    stem = str(path).replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_config(text, master_seed, name=stem)


# -- trace ------------------------------------------------------------------

def _int_field(obj, key, line, required=True, default=None):
    if key not in obj:
        if required:
            raise ParseError(line, f"missing field {key!r}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ParseError(line, f"field {key!r} must be a non-negative integer")
    return value


def _parse_fraction(value, line):
    try:
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(repr(value))
        if isinstance(value, int) and not isinstance(value, bool):
            return Fraction(value)
    except (ValueError, ZeroDivisionError):
        pass
    raise ParseError(line, f"bad fraction {value!r}")


def _parse_mode(obj, line):
    mode = obj.get("mode", "full")
    if mode == "full":
        return Full()
    if mode != "partial":
        raise ParseError(line, f"unknown mode {mode!r}")
    fraction = _parse_fraction(obj.get("fraction"), line)
    stripes = _int_field(obj, "stripes", line, required=False)
    try:
        return Partial(fraction, stripes)
    except ValueError as exc:
        raise ParseError(line, str(exc)) from None


def _parse_source(obj, line):
    src = obj.get("source", "device")
    if src == "device":
        return src
    if isinstance(src, dict) and len(src) == 1:
        (key, value), = src.items()
        if key in ("device_seed", "host_seed") and isinstance(value, int) and not isinstance(value, bool):
            return {key: value & MASK64}
        if key == "host_hex" and isinstance(value, str):
            try:
                return {key: bytes.fromhex(value).hex()}
            except ValueError:
                pass
    raise ParseError(line, f"bad source {src!r}")


def parse_trace(text):
    records = []
    last_t = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, exc.msg, exc.colno) from None
        if not isinstance(obj, dict):
            raise ParseError(lineno, "record must be a JSON object")
        t = _int_field(obj, "t", lineno)
        try:
            op = TraceOp(obj.get("op"))
        except ValueError:
            raise ParseError(lineno, f"unknown op {obj.get('op')!r}") from None
        personal = obj.get("personal", False)
        if not isinstance(personal, bool):
            raise ParseError(lineno, "field 'personal' must be a boolean")
        kwargs = {"t": t, "op": op, "personal": personal, "line": lineno}
        if op is TraceOp.PRIVACY_DELETE:
            target = obj.get("target", "page")
            if target == "personal":
                kwargs["page"] = None
            elif target == "page":
                kwargs["page"] = _int_field(obj, "page", lineno)
            else:
                raise ParseError(lineno, f"unknown target {target!r}")
            kwargs["mode"] = _parse_mode(obj, lineno)
            kwargs["source"] = _parse_source(obj, lineno)
            kwargs["window"] = _int_field(obj, "window", lineno, required=False)
        else:
            kwargs["page"] = _int_field(obj, "page", lineno)
            if op is TraceOp.WRITE:
                kwargs["seed"] = _int_field(obj, "seed", lineno) & MASK64
        if last_t is not None and t < last_t:
            raise OrderError(lineno, f"t={t} goes back in time (previous t={last_t})")
        last_t = t
        records.append(TraceRecord(**kwargs))
    return records


def load_trace(path):
    try:
        with open(path) as fh:
            return parse_trace(fh.read())
    except OSError as exc:
        raise ConfigError(str(exc)) from exc


# -- run --------------------------------------------------------------------

@dataclass
class RunReport:
    scenario: Scenario
    records: int
    completions: list
    image: bytes
    image_meta: dict
    remanence: object
    ledgers: dict
    accounting: dict
    manifest: list = field(default_factory=list)

    def as_dict(self):
        counts = {s.value: 0 for s in CompletionStatus}
        for c in self.completions:
            counts[c.status.value] += 1
        return {
            "scenario": self.scenario.as_dict(),
            "records": self.records,
            "completions": [c.as_dict() for c in self.completions],
            "completion_counts": counts,
            "image": {"bytes": len(self.image), "sha256": hashlib.sha256(self.image).hexdigest(),
                      "frame_states": _state_counts(self.image_meta)},
            "remanence": self.remanence.as_dict(),
            "ledgers": {k: v.as_dict() for k, v in self.ledgers.items()},
            "comparison": compare(self.ledgers["policy"], self.ledgers["baseline"]),
            "accounting": self.accounting,
        }


def _state_counts(meta):
    out = {"free": 0, "live": 0, "stale": 0}
    for frame in meta["frames"]:
        out[frame["state"]] += 1
    return out


def payload_for(seed, page_size):
    return splitmix64_bytes(seed, page_size)


class ScenarioRunner:
    """Replays a trace against cache + device + protocol for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.device = NvmDevice(scenario.kind, scenario.geometry, scenario.params,
                                scenario.allocation)
        self.cache = DramCache(scenario.cache, self.device)
        self.protocol = PrivacyProtocol(self.device)
        self.completions = []
        empty = CostLedger(scenario.params, scenario.geometry.page_size)
        self.ledgers = {"workload": empty.copy(), "baseline": empty.copy(), "policy": empty.copy()}
        # ground truth held by the experimenter, never by the device
        self.versions = {}       # page -> payloads written since its last deletion
        self.deleted = {}        # page -> personal payloads removed by a deletion
        self.fate = {}           # personal page -> final category
        self.next_request = 1
        self.processed = 0

    def _flush_until(self, t):
        while True:
            due = self.cache.next_flush_due()
            if due is None or due > t:
                break
            self.cache.tick_flush(due)

    def _charged(self, category, fn, *args):
        before = self.device.ledger.copy()
        try:
            return fn(*args)
        finally:
            self.ledgers[category].merge(self.device.ledger.since(before))

    def _resolve_source(self, descriptor, request_id):
        page_size = self.scenario.geometry.page_size
        if descriptor == "device":
            return DeviceInternal(derive_seed(self.scenario.master_seed, request_id))
        (key, value), = descriptor.items()
        if key == "device_seed":
            return DeviceInternal(value)
        if key == "host_seed":
            return HostSupplied(splitmix64_bytes(value, page_size))
        return HostSupplied(bytes.fromhex(value))

    def _forget(self, page, outcome):
        history = self.versions.pop(page, [])
        personal = [data for data, is_personal in history if is_personal]
        if personal:
            self.deleted.setdefault(page, []).extend(personal)
        if page in self.fate:
            self.fate[page] = outcome

    def apply(self, rec: TraceRecord):
        page_size = self.scenario.geometry.page_size
        if rec.op is TraceOp.WRITE:
            data = payload_for(rec.seed, page_size)
            self._charged("workload", self.cache.access_write, rec.page, data, rec.personal, rec.t)
            self.versions.setdefault(rec.page, []).append((data, rec.personal))
            if rec.personal:
                self.fate[rec.page] = "live"
        elif rec.op is TraceOp.READ:
            self._charged("workload", self.cache.access_read, rec.page, rec.t)
        elif rec.op is TraceOp.BASELINE_DELETE:
            cached = self.cache.discard(rec.page)
            if cached is None or self.device.table.lookup(rec.page) is not None:
                self._charged("baseline", self.device.baseline_delete, rec.page)
            self._forget(rec.page, "baseline_deleted")
        else:
            self._privacy_delete(rec)

    def _privacy_delete(self, rec):
        request_id = self.next_request
        self.next_request += 1
        if rec.page is None:
            target = ByPersonalTag()
            self.cache.discard_personal()
        else:
            target = ByLogicalPage(rec.page)
            self.cache.discard(rec.page)
        request = DeletionRequest(request_id, target, rec.mode,
                                  self._resolve_source(rec.source, request_id),
                                  rec.window or self.scenario.window)
        originals = [(p, d) for p, hist in sorted(self.versions.items()) for d, _ in hist]
        originals += [(p, d) for p, hist in sorted(self.deleted.items()) for d in hist]
        completion = self._charged("policy", self.protocol.run, request, originals)
        self.completions.append(completion)
        pages = set(completion.pages)
        if rec.page is not None:
            pages.add(rec.page)
        else:
            pages.update(p for p, hist in self.versions.items() if any(pp for _, pp in hist))
        pages = sorted(pages)
        if completion.status is CompletionStatus.DELETED:
            for p in pages:
                self._forget(p, "privacy_deleted")
        else:
            for p in pages:
                if p in self.fate:
                    self.fate[p] = completion.status.value

    def partial_state(self):
        image, meta = self.device.dump_image()
        return {
            "records_applied": self.processed,
            "completions": [c.as_dict() for c in self.completions],
            "frame_states": _state_counts(meta),
            "ledger": self.device.ledger.as_dict(),
        }

    def run(self, records) -> RunReport:
        for rec in records:
            try:
                self._charged("workload", self._flush_until, rec.t)
                self.apply(rec)
            except SimulationError as exc:
                raise SimulationAborted(rec, exc, self.partial_state()) from exc
            self.processed += 1
        try:
            self._charged("workload", self.cache.flush_all)
        except SimulationError as exc:
            raise SimulationAborted(TraceRecord(0, TraceOp.WRITE, line=0), exc,
                                    self.partial_state()) from exc
        return self._finish(len(records))

    def _finish(self, n_records):
        geometry = self.scenario.geometry
        image, meta = self.device.dump_image()
        manifest = [(p, d) for p in sorted(self.deleted) for d in self.deleted[p]]
        remanence = scan_medium(image, geometry, manifest, self.scenario.window)
        recoverable = set(remanence.recoverable_pages)
        accounting = {k: 0 for k in ("live", "privacy_deleted", "residue_found", "error",
                                     "baseline_deleted_recoverable",
                                     "baseline_deleted_unrecoverable")}
        for page, fate in self.fate.items():
            if fate == "baseline_deleted":
                fate += "_recoverable" if page in recoverable else "_unrecoverable"
            accounting[fate] += 1
        ledgers = dict(self.ledgers)
        ledgers["total"] = self.device.ledger.copy()
        return RunReport(self.scenario, n_records, list(self.completions), image, meta,
                         remanence, ledgers, accounting, manifest)


def run_scenario(scenario: Scenario, records) -> RunReport:
    return ScenarioRunner(scenario).run(records)


# -- output -----------------------------------------------------------------

def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def summary_row(report: dict):
    counts = report["completion_counts"]
    rem = report["remanence"]
    return {
        "scenario": report["scenario"]["name"],
        "kind": report["scenario"]["kind"],
        "page_size": report["scenario"]["geometry"]["page_size"],
        "frame_count": report["scenario"]["geometry"]["frame_count"],
        "records": report["records"],
        "completions": len(report["completions"]),
        "deleted": counts["deleted"],
        "residue_found": counts["residue_found"],
        "errors": counts["error"],
        "deleted_pages_total": rem["deleted_pages_total"],
        "deleted_pages_recoverable": rem["deleted_pages_recoverable"],
        "remanence_rate": repr(float(rem["remanence_rate"])),
        "latency_ns": repr(float(report["ledgers"]["total"]["latency_ns"])),
        "energy_nj": repr(float(report["ledgers"]["total"]["energy_nj"])),
        "baseline_latency_ns": repr(float(report["ledgers"]["baseline"]["latency_ns"])),
        "policy_latency_ns": repr(float(report["ledgers"]["policy"]["latency_ns"])),
    }


def emit_report(report, fmt="json"):
    """Serialise one report (or a list of them) as canonical JSON or a CSV summary."""
    reports = report if isinstance(report, list) else [report]
    reports = [r.as_dict() if isinstance(r, RunReport) else r for r in reports]
    if fmt == "json":
        return canonical_json(reports if isinstance(report, list) else reports[0])
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow(summary_row(r))
        return buf.getvalue()
    raise UnsupportedFormat(f"unsupported report format {fmt!r}")


def manifest_to_json(manifest):
    return {"pages": [{"page": p, "payload_hex": d.hex()} for p, d in manifest]}


def manifest_from_json(obj, page_size):
    out = []
    try:
        for item in obj["pages"]:
            if "payload_hex" in item:
                out.append((int(item["page"]), bytes.fromhex(item["payload_hex"])))
            else:
                out.append((int(item["page"]), payload_for(int(item["seed"]), page_size)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad manifest: {exc}") from exc
    return out
