"""Trace-driven hybrid DRAM+NVM simulator with privacy-protection deletion.

Personal data in NVM is overwritten with random data, the overwrite is
verified by a fragment scan, and a completion is issued. A forensic scanner
and a cost ledger quantify remanence and deletion expense against plain
mapping-table deletion.
"""

from .cache import CacheConfig, DramCache
from .cost import CostLedger, CostParams, compare
from .device import (DeviceInternal, Full, HostSupplied, NvmDevice, Partial,
                     generate_random_data, overwrite_spans)
from .forensics import FragmentMatch, RemanenceReport, diff_image, find_fragments, scan_medium
from .harness import Scenario, TraceRecord, emit_report, parse_config, parse_trace, run_scenario
from .memory import (AllocPolicy, FrameState, MappingTable, Medium, MediumGeometry, NvmKind,
                     baseline_delete, dump_image)
from .protocol import (ByLogicalPage, ByPersonalTag, CompletionStatus, DeletionRequest,
                       PrivacyProtocol, ProtocolState, run_protocol, search_targets,
                       verify_absence)
from .rng import SplitMix64, splitmix64_bytes

__version__ = "0.1.0"
