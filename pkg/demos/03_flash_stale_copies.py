"""
Stale copies on flash-like NVM
==============================

Flash cannot update in place, so every rewrite or baseline deletion leaves
a stale copy behind until garbage collection happens to erase its block.
Here ten personal pages are deleted, the medium fills up, and garbage
collection erases three blocks: six stale copies vanish, four survive.
"""

from hybridwipe import (ByPersonalTag, DeletionRequest, MediumGeometry, NvmDevice, NvmKind,
                        run_protocol, scan_medium, splitmix64_bytes)
from hybridwipe.memory import FrameState

geometry = MediumGeometry(frame_count=32, page_size=512, block_size=2)
device = NvmDevice(NvmKind.FLASH_LIKE, geometry)
personal = {page: splitmix64_bytes(500 + page, 512) for page in range(10)}

for page, data in personal.items():
    device.write(page, data, personal=True)
for page in personal:
    device.baseline_delete(page)
print("stale frames after baseline delete:", sorted(device.table.stale_index))

# fill the medium, then keep writing so garbage collection kicks in
for page in range(100, 128):
    device.write(page, splitmix64_bytes(page, 512), personal=False)
print("garbage collections:", device.gc_runs)

report = scan_medium(device.medium.image(), geometry, personal.items(), window=16)
print(f"remanence after GC: {report.deleted_pages_recoverable}/{report.deleted_pages_total}"
      f" = {float(report.remanence_rate):.0%} (pages {report.recoverable_pages})")

##############################################################################
# The policy finds the invalid (stale) copies too, via the personal tag kept
# in the stale index, and clears them in place without an erase.

completion = run_protocol(device, DeletionRequest(1, ByPersonalTag()), personal)
print("privacy delete:", completion.status.value, "frames sanitized:", completion.frames_sanitized,
      "block erases:", completion.cost.counters["block_erases"])
report = scan_medium(device.medium.image(), geometry, personal.items(), window=16)
print(f"remanence after policy: {float(report.remanence_rate):.0%}")
stale = sum(1 for f in device.medium.frames if f.state is FrameState.STALE)
print("stale frames (now zero-filled, awaiting erase):", stale)
