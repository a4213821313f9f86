"""
How much of a page must be overwritten?
=======================================

Partial overwrites are cheaper but can leave contiguous runs of the
original data behind. With a 16-byte fragment window, a prefix overwrite
always leaves residue, while a striped overwrite whose untouched gaps are
shorter than the window passes verification.
"""

from fractions import Fraction

from hybridwipe import (ByLogicalPage, DeletionRequest, DeviceInternal, Full, MediumGeometry,
                        NvmDevice, NvmKind, Partial, run_protocol, splitmix64_bytes)

geometry = MediumGeometry(frame_count=8, page_size=4096, block_size=8)
original = splitmix64_bytes(2024, geometry.page_size)

modes = [Partial(Fraction(1, 64)), Partial(Fraction(1, 4)), Partial(Fraction(1, 2)),
         Partial(Fraction(1, 2), stripes=256), Partial(Fraction(3, 4), stripes=128), Full()]

print(f"{'mode':28s} {'status':14s} {'fragments':>9s} {'latency ns':>11s}")
for mode in modes:
    device = NvmDevice(NvmKind.OVERWRITABLE, geometry)
    device.write(0, original, personal=True)
    completion = run_protocol(device, DeletionRequest(1, ByLogicalPage(0), mode, DeviceInternal(7)),
                              {0: original})
    print(f"{mode.describe():28s} {completion.status.value:14s} "
          f"{completion.residue_fragments:>9d} {completion.cost.latency_ns:>11.1f}")
