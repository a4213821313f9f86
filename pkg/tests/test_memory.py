import json

import pytest
from hypothesis import given, settings, strategies as st

from hybridwipe.errors import BadFrame, MediumFull, NotMapped
from hybridwipe.memory import (AllocPolicy, FrameState, MappingTable, Medium, MediumGeometry,
                               NvmKind, audit, baseline_delete, dump_image, read_image,
                               write_image)


@pytest.mark.parametrize("kwargs", [
    dict(frame_count=0), dict(frame_count=8, page_size=0),
    dict(frame_count=8, block_size=0), dict(frame_count=10, block_size=4),
])
def test_geometry_validation(kwargs):
    with pytest.raises(ValueError):
        MediumGeometry(**kwargs)


def test_geometry_defaults():
    g = MediumGeometry(frame_count=128)
    assert (g.page_size, g.block_size, g.block_count) == (4096, 64, 2)


def test_initial_fill():
    g = MediumGeometry(4, 8, 2)
    assert Medium(g, NvmKind.FLASH_LIKE).image() == b"\xff" * 32
    assert Medium(g, NvmKind.OVERWRITABLE).image() == bytes(32)


def test_allocate_first_free():
    m = Medium(MediumGeometry(8, 8, 4), NvmKind.OVERWRITABLE)
    assert m.allocate() == 0
    m.allocate(), m.allocate()
    assert m.allocate() == 3
    for _ in range(4):
        m.allocate()
    with pytest.raises(MediumFull):
        m.allocate()


def test_allocate_round_robin_wraps():
    m = Medium(MediumGeometry(4, 8, 2), NvmKind.OVERWRITABLE)
    assert [m.allocate(AllocPolicy.ROUND_ROBIN) for _ in range(3)] == [0, 1, 2]
    m.frames[1].state = FrameState.FREE
    assert m.allocate(AllocPolicy.ROUND_ROBIN) == 3
    assert m.allocate(AllocPolicy.ROUND_ROBIN) == 1


def test_translate():
    t = MappingTable()
    t.map(5, 2, personal=True)
    assert t.translate(5) == 2
    assert t.translate(6) is None
    t.invalidate(5)
    assert t.translate(5) is None


@pytest.mark.parametrize("kind,state", [(NvmKind.OVERWRITABLE, FrameState.FREE),
                                        (NvmKind.FLASH_LIKE, FrameState.STALE)])
def test_baseline_delete_keeps_bytes(kind, state):
    m = Medium(MediumGeometry(8, 8, 4), kind)
    t = MappingTable()
    fid = m.allocate()
    m.frames[fid].data[:] = b"XXXXXXXX"
    t.map(5, fid, personal=True)
    before = m.image()
    out = baseline_delete(m, t, 5)
    assert out.state is state
    assert m.image() == before
    assert bytes(m.frames[fid].data) == b"XXXXXXXX"
    assert (fid in t.stale_index) == (kind is NvmKind.FLASH_LIKE)
    assert audit(m, t) == []


def test_baseline_delete_unmapped():
    m = Medium(MediumGeometry(8, 8, 4), NvmKind.OVERWRITABLE)
    with pytest.raises(NotMapped):
        baseline_delete(m, MappingTable(), 9)


def test_bad_frame():
    m = Medium(MediumGeometry(8, 8, 4), NvmKind.OVERWRITABLE)
    with pytest.raises(BadFrame):
        m.frame(8)


def test_dump_concatenation_and_purity():
    m = Medium(MediumGeometry(2, 4, 1), NvmKind.OVERWRITABLE)
    m.frames[0].data[:] = bytes.fromhex("AABBCCDD")
    m.frames[1].data[:] = bytes.fromhex("00112233")
    image, meta = dump_image(m)
    assert image.hex() == "aabbccdd00112233"
    assert dump_image(m)[0] == image
    assert meta["geometry"]["frame_count"] == 2
    assert [f["id"] for f in meta["frames"]] == [0, 1]


def test_image_roundtrip(tmp_path):
    m = Medium(MediumGeometry(4, 8, 2), NvmKind.FLASH_LIKE)
    m.frames[2].erase_count = 3
    img_path, meta_path = write_image(m, tmp_path / "image.bin")
    assert meta_path.endswith("image.meta.json")
    image, geometry, meta = read_image(img_path)
    assert image == m.image() and geometry == m.geometry
    assert json.load(open(meta_path))["frames"][2]["erase_count"] == 3


ops = st.lists(st.tuples(st.sampled_from(["write", "delete"]), st.integers(0, 11)), max_size=60)


@settings(max_examples=60, deadline=None)
@given(ops, st.sampled_from(list(NvmKind)))
def test_structural_invariants_hold(sequence, kind):
    from hybridwipe import NvmDevice
    from hybridwipe.errors import SimulationError

    dev = NvmDevice(kind, MediumGeometry(16, 8, 4))
    for i, (op, page) in enumerate(sequence):
        before = dev.medium.image()
        try:
            if op == "write":
                dev.write(page, bytes([i % 256]) * 8, personal=page % 2 == 0)
            else:
                dev.baseline_delete(page)
                assert dev.medium.image() == before
        except (NotMapped, SimulationError):
            pass
        assert audit(dev.medium, dev.table) == []
        states = [f.state for f in dev.medium.frames]
        assert len(states) == 16
