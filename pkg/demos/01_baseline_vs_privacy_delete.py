"""
Baseline deletion versus privacy-protection deletion
=====================================================

Unmapping a page (baseline deletion) leaves its bytes on the NVM medium.
The privacy-protection policy overwrites the page with random data,
verifies nothing of the original survives, and only then reports the
deletion as complete.
"""

from hybridwipe import (ByLogicalPage, DeletionRequest, DeviceInternal, MediumGeometry,
                        NvmDevice, NvmKind, compare, run_protocol, scan_medium, splitmix64_bytes)

geometry = MediumGeometry(frame_count=64, page_size=4096, block_size=16)
payloads = {page: splitmix64_bytes(500 + page, geometry.page_size) for page in range(16)}

##############################################################################
# Write 16 personal pages, then delete them the cheap way.

baseline = NvmDevice(NvmKind.OVERWRITABLE, geometry)
for page, data in payloads.items():
    baseline.write(page, data, personal=True)
before = baseline.ledger.copy()
for page in payloads:
    baseline.baseline_delete(page)
baseline_cost = baseline.ledger.since(before)

report = scan_medium(baseline.medium.image(), geometry, payloads.items(), window=16)
print(f"baseline delete: remanence {float(report.remanence_rate):.0%}, "
      f"{len(report.fragments)} fragments found")

##############################################################################
# Same pages, privacy-protection deletion with device-generated random data.

policy = NvmDevice(NvmKind.OVERWRITABLE, geometry)
for page, data in payloads.items():
    policy.write(page, data, personal=True)
before = policy.ledger.copy()
for request_id, page in enumerate(payloads, start=1):
    completion = run_protocol(policy, DeletionRequest(request_id, ByLogicalPage(page),
                                                      source=DeviceInternal(request_id)),
                              {page: payloads[page]})
    assert completion.status.value == "deleted"
policy_cost = policy.ledger.since(before)

report = scan_medium(policy.medium.image(), geometry, payloads.items(), window=16)
print(f"privacy delete:  remanence {float(report.remanence_rate):.0%}")

##############################################################################
# The price of the guarantee, in the (illustrative) cost model.

for dim, row in compare(policy_cost, baseline_cost).items():
    print(f"  {dim:22s} policy={row['a']:>10} baseline={row['b']:>8} ratio={row['ratio']}")
