"""Pure-Python range coder kernels (fallback for the compiled extension).

Byte-compatible with ``_ccoder``: a 32-bit range coder with a 33-bit low
register and carry propagation through a cached byte plus a run of pending
0xFF bytes. The order-0 adaptive model keeps its counts in a Fenwick tree.
"""

import numpy as np

from .errors import CoderError, TruncatedStreamError

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
MAX_TOTAL = 1 << 18


class _Fenwick:
    def __init__(self, counts):
        self.n = len(counts)
        size = 1
        while size < self.n:
            size <<= 1
        self.size = size
        self.rebuild(counts)

    def rebuild(self, counts):
        tree = [0] * (self.size + 1)
        for i, c in enumerate(counts):
            tree[i + 1] = int(c)
        for i in range(1, self.size + 1):
            j = i + (i & -i)
            if j <= self.size:
                tree[j] += tree[i]
        self.tree = tree

    def add(self, i, delta):
        i += 1
        tree = self.tree
        size = self.size
        while i <= size:
            tree[i] += delta
            i += i & -i

    def prefix(self, i):
        s = 0
        tree = self.tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, target):
        """Return (symbol, cumulative count below symbol) for a target count."""
        pos = 0
        rem = target
        step = self.size
        tree = self.tree
        while step:
            nxt = pos + step
            if tree[nxt] <= rem:
                pos = nxt
                rem -= tree[nxt]
            step >>= 1
        return pos, target - rem


def _update(counts, fen, total, s):
    counts[s] += 1
    fen.add(s, 1)
    total += 1
    if total > MAX_TOTAL:
        for i in range(len(counts)):
            counts[i] = (counts[i] + 1) >> 1
        fen.rebuild(counts)
        total = sum(counts)
    return total


def encode_symbols(symbols, counts) -> bytes:
    """Encode ``symbols``; ``counts`` (int64 array) is updated in place."""
    alphabet = len(counts)
    cnt = [int(c) for c in counts]
    fen = _Fenwick(cnt)
    total = sum(cnt)
    out = bytearray()
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    skip_first = True

    def shift_low():
        nonlocal low, cache, cache_size, skip_first
        if (low & MASK32) < 0xFF000000 or low > MASK32:
            carry = low >> 32
            temp = cache
            while True:
                if skip_first:
                    skip_first = False
                else:
                    out.append((temp + carry) & 0xFF)
                temp = 0xFF
                cache_size -= 1
                if cache_size == 0:
                    break
            cache = (low >> 24) & 0xFF
        cache_size += 1
        low = (low & 0x00FFFFFF) << 8

    for s in symbols:
        s = int(s)
        if s < 0 or s >= alphabet:
            raise CoderError(f"symbol {s} outside alphabet of size {alphabet}")
        r = rng // total
        low += r * fen.prefix(s)
        rng = r * cnt[s]
        while rng < TOP:
            rng <<= 8
            shift_low()
        total = _update(cnt, fen, total, s)
    for _ in range(5):
        shift_low()
    counts[:] = cnt
    return bytes(out)


def decode_symbols(data, count, counts) -> np.ndarray:
    """Decode ``count`` symbols; ``counts`` is updated in place."""
    data = bytes(data)
    n = len(data)
    cnt = [int(c) for c in counts]
    fen = _Fenwick(cnt)
    total = sum(cnt)
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    if n < 4:
        raise TruncatedStreamError("stream shorter than the 4-byte preamble")
    code = int.from_bytes(data[:4], "big")
    pos = 4
    rng = MASK32
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        r = rng // total
        target = code // r
        if target >= total:
            raise CoderError("corrupt range-coder stream")
        s, cum = fen.find(target)
        code -= r * cum
        rng = r * cnt[s]
        while rng < TOP:
            if pos >= n:
                raise TruncatedStreamError("range-coder stream truncated")
            code = ((code << 8) | data[pos]) & MASK32
            pos += 1
            rng <<= 8
        out[k] = s
        total = _update(cnt, fen, total, s)
    counts[:] = cnt
    return out


def reconstruct_tiles(plane, rows, cols, sizes, residuals):
    """Invert the DPCM prediction tile by tile, filling ``plane`` in place.

    ``residuals`` holds one row of K values per tile in canonical order.
    The predictor of a tile origin is its left neighbour on the first image
    row and its upper neighbour elsewhere; both precede it in canonical order.
    """
    k = plane.shape[2]
    for t in range(len(rows)):
        i = int(rows[t])
        j = int(cols[t])
        n = int(sizes[t])
        if i == 0 and j == 0:
            pred = [0] * k
        elif i == 0:
            pred = plane[0, j - 1, :]
        else:
            pred = plane[i - 1, j, :]
        plane[i : i + n, j : j + n, :] = residuals[t] + pred
    return plane
