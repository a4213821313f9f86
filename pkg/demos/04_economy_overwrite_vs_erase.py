"""
Targeted overwrite versus relocate-and-erase
============================================

Physically erasing personal data on flash means relocating every other
valid page in its block and erasing the block. Clearing just the targeted
pages in place is far cheaper as long as an erase costs much more than a
page program.
"""

from hybridwipe import (ByLogicalPage, CostParams, DeletionRequest, MediumGeometry, NvmDevice,
                        NvmKind, run_protocol, splitmix64_bytes)

params = CostParams.illustrative(NvmKind.FLASH_LIKE)
print(f"illustrative flash costs: program {params.write_latency:.0f} ns, "
      f"erase {params.erase_latency:.0f} ns")


def fresh(k):
    device = NvmDevice(NvmKind.FLASH_LIKE, MediumGeometry(16, 4096, 8), params)
    for page in range(8):
        device.write(page, splitmix64_bytes(page, 4096), personal=page < k)
    return device


print(f"{'k':>2} {'overwrite ms':>13} {'erase path ms':>14}")
for k in range(1, 9):
    device = fresh(k)
    before = device.ledger.copy()
    for page in range(k):
        run_protocol(device, DeletionRequest(page + 1, ByLogicalPage(page)),
                     {page: splitmix64_bytes(page, 4096)})
    overwrite = device.ledger.since(before).latency_ns

    device = fresh(k)
    before = device.ledger.copy()
    device.sanitize_by_erase(range(k))
    erase = device.ledger.since(before).latency_ns
    print(f"{k:>2} {overwrite / 1e6:>13.3f} {erase / 1e6:>14.3f}")
