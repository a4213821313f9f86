"""Offline forensic scanning of raw medium images.

Fragments are found with a polynomial rolling hash over every window of
``window`` bytes (mod 2**64, vectorised with numpy), confirmed byte for byte,
then merged along each (frame, payload, diagonal) into maximal runs. A
fragment never crosses a frame boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import BadImage, LengthMismatch

_BASE = 0x100000001B3
_BASE_INV = pow(_BASE, -1, 1 << 64)
_VERIFY_CHUNK = 1 << 22


@dataclass(frozen=True, order=True)
class FragmentMatch:
    frame_id: int
    offset_in_frame: int
    length: int
    source_page: int
    source_offset: int

    def as_dict(self):
        return {"frame_id": self.frame_id, "offset_in_frame": self.offset_in_frame,
                "length": self.length, "source_page": self.source_page,
                "source_offset": self.source_offset}


@dataclass
class RemanenceReport:
    scanned_frames: int
    deleted_pages_total: int
    deleted_pages_recoverable: int
    fragments: list = field(default_factory=list)
    recoverable_pages: list = field(default_factory=list)

    @property
    def remanence_rate(self) -> Fraction:
        if not self.deleted_pages_total:
            return Fraction(0)
        return Fraction(self.deleted_pages_recoverable, self.deleted_pages_total)

    def as_dict(self):
        return {
            "scanned_frames": self.scanned_frames,
            "deleted_pages_total": self.deleted_pages_total,
            "deleted_pages_recoverable": self.deleted_pages_recoverable,
            "remanence_rate": float(self.remanence_rate),
            "recoverable_pages": list(self.recoverable_pages),
            "fragments": [f.as_dict() for f in self.fragments],
        }


@lru_cache(maxsize=16)
def _powers(base, n):
    out = np.empty(n, dtype=np.uint64)
    out[0] = 1
    if n > 1:
        out[1:] = base
        np.cumprod(out, out=out)
    out.setflags(write=False)
    return out


def _window_hashes(rows, window):
    """Hash of every length-``window`` slice of each row; shape (R, cols - window + 1)."""
    cols = rows.shape[1]
    with np.errstate(over="ignore"):
        weighted = rows.astype(np.uint64) * _powers(_BASE, cols)
        prefix = np.zeros((rows.shape[0], cols + 1), dtype=np.uint64)
        np.cumsum(weighted, axis=1, out=prefix[:, 1:])
        span = prefix[:, window:] - prefix[:, :-window]
        span *= _powers(_BASE_INV, cols - window + 1)
        return span


def _confirm(hay, hay_pos, needle, needle_pos, window):
    ok = np.empty(len(hay_pos), dtype=bool)
    step = max(1, _VERIFY_CHUNK // window)
    offs = np.arange(window)
    for lo in range(0, len(hay_pos), step):
        hi = lo + step
        a = hay[hay_pos[lo:hi, None] + offs]
        b = needle[needle_pos[lo:hi, None] + offs]
        ok[lo:hi] = (a == b).all(axis=1)
    return ok


def find_fragments(image, page_size, payloads, window, frame_ids=None):
    """Maximal runs (length >= window) shared by a frame and some payload.

    ``payloads`` is an iterable of (source_page, bytes). Only frames listed in
    ``frame_ids`` are searched when given. Returns sorted FragmentMatch list.
    """
    img = np.frombuffer(bytes(image), dtype=np.uint8)
    n_frames = len(img) // page_size
    frames = img[:n_frames * page_size].reshape(n_frames, page_size)
    if frame_ids is None:
        frame_ids = np.arange(n_frames)
    else:
        frame_ids = np.asarray(sorted(set(frame_ids)), dtype=np.int64)
        frames = frames[frame_ids]
    return match_frames(frames, frame_ids, payloads, window)


def match_frames(frames, frame_ids, payloads, window):
    """Core matcher over a (n, page_size) uint8 array whose rows are frames ``frame_ids``."""
    if window < 1:
        raise ValueError("window must be at least 1")
    payloads = sorted({(int(p), bytes(d)) for p, d in payloads})
    page_size = frames.shape[1]
    if window > page_size or not payloads or len(frame_ids) == 0:
        return []

    # flatten every payload window into (hash, payload index, offset)
    p_hash, p_idx, p_off, p_base = [], [], [], []
    flat, base = [], 0
    for k, (_, data) in enumerate(payloads):
        arr = np.frombuffer(data, dtype=np.uint8)
        p_base.append(base)
        flat.append(arr)
        if len(arr) >= window:
            h = _window_hashes(arr[None, :], window)[0]
            p_hash.append(h)
            p_idx.append(np.full(len(h), k, dtype=np.int64))
            p_off.append(np.arange(len(h), dtype=np.int64))
        base += len(arr)
    if not p_hash:
        return []
    p_hash = np.concatenate(p_hash)
    p_idx = np.concatenate(p_idx)
    p_off = np.concatenate(p_off)
    p_base = np.asarray(p_base, dtype=np.int64)
    needle = np.concatenate(flat)
    order = np.argsort(p_hash)
    p_hash, p_idx, p_off = p_hash[order], p_idx[order], p_off[order]

    f_hash = _window_hashes(frames, window)
    per_frame = f_hash.shape[1]
    f_hash = f_hash.ravel()
    # bitmap over the high hash bits discards most non-matching windows cheaply
    bits = int(min(22, max(10, np.ceil(np.log2(len(p_hash) * 16)))))
    shift = np.uint64(64 - bits)
    bitmap = np.zeros(1 << bits, dtype=bool)
    bitmap[p_hash >> shift] = True
    cand = np.flatnonzero(bitmap[f_hash >> shift])
    if len(cand) == 0:
        return []
    lo = np.searchsorted(p_hash, f_hash[cand], side="left")
    reps = np.searchsorted(p_hash, f_hash[cand], side="right") - lo
    keep = reps > 0
    cand, lo, reps = cand[keep], lo[keep], reps[keep]
    if len(cand) == 0:
        return []
    hay_flat = np.repeat(cand, reps)
    starts = np.repeat(lo, reps)
    within = np.arange(len(hay_flat)) - np.repeat(np.cumsum(reps) - reps, reps)
    pj = starts + within

    row = hay_flat // per_frame
    off = hay_flat % per_frame
    hay = frames.ravel()
    ok = _confirm(hay, row * page_size + off, needle,
                  p_base[p_idx[pj]] + p_off[pj], window)
    row, off, pk, po = row[ok], off[ok], p_idx[pj][ok], p_off[pj][ok]
    if len(row) == 0:
        return []

    # merge consecutive window hits on the same diagonal into maximal runs
    diag = off - po
    order = np.lexsort((off, diag, pk, row))
    row, off, pk, po, diag = row[order], off[order], pk[order], po[order], diag[order]
    new_run = np.ones(len(row), dtype=bool)
    new_run[1:] = ((row[1:] != row[:-1]) | (pk[1:] != pk[:-1])
                   | (diag[1:] != diag[:-1]) | (off[1:] != off[:-1] + 1))
    run_start = np.flatnonzero(new_run)
    run_end = np.append(run_start[1:], len(row)) - 1
    out = {
        FragmentMatch(int(frame_ids[row[s]]), int(off[s]), int(off[e] - off[s]) + window,
                      payloads[pk[s]][0], int(po[s]))
        for s, e in zip(run_start, run_end)
    }
    return sorted(out)


def scan_medium(image, geometry, manifest, window=16) -> RemanenceReport:
    """Remanence of deleted pages over a raw image.

    ``manifest`` lists (logical_page, original payload) pairs; a page may be
    listed with several payload versions. A page is recoverable when any
    ``window``-byte fragment of any of its payloads appears anywhere.
    """
    if len(image) != geometry.image_size:
        raise BadImage(f"image is {len(image)} bytes, geometry needs {geometry.image_size}")
    manifest = list(manifest)
    pages = sorted({int(p) for p, _ in manifest})
    fragments = find_fragments(image, geometry.page_size, manifest, window)
    recoverable = sorted({f.source_page for f in fragments})
    return RemanenceReport(geometry.frame_count, len(pages), len(recoverable),
                           fragments, recoverable)


def diff_image(before, after):
    """Maximal (offset, length) ranges where two equal-length images differ."""
    if len(before) != len(after):
        raise LengthMismatch(f"{len(before)} != {len(after)} bytes")
    a = np.frombuffer(bytes(before), dtype=np.uint8)
    b = np.frombuffer(bytes(after), dtype=np.uint8)
    changed = np.flatnonzero(a != b)
    if len(changed) == 0:
        return []
    breaks = np.flatnonzero(np.diff(changed) != 1)
    starts = np.concatenate(([changed[0]], changed[breaks + 1]))
    ends = np.concatenate((changed[breaks], [changed[-1]]))
    return [(int(s), int(e - s + 1)) for s, e in zip(starts, ends)]
