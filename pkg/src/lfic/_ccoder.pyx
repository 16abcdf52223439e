# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled range coder kernels; byte-compatible with ``_pycoder``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t
from libc.stdlib cimport malloc, calloc, realloc, free

from .errors import CoderError, TruncatedStreamError

cnp.import_array()

cdef uint32_t TOP = 1 << 24
cdef uint64_t MASK32 = 0xFFFFFFFF
cdef int64_t MAX_TOTAL = 1 << 18


cdef struct Model:
    int64_t n
    int64_t size
    int64_t total
    int64_t *counts
    int64_t *tree


cdef int model_init(Model *m, int64_t[::1] counts) except -1:
    cdef int64_t i
    m.n = counts.shape[0]
    m.size = 1
    while m.size < m.n:
        m.size <<= 1
    m.counts = <int64_t *> malloc(m.n * sizeof(int64_t))
    m.tree = <int64_t *> calloc(m.size + 1, sizeof(int64_t))
    if m.counts == NULL or m.tree == NULL:
        raise MemoryError()
    for i in range(m.n):
        m.counts[i] = counts[i]
    model_rebuild(m)
    return 0


cdef void model_free(Model *m) noexcept:
    free(m.counts)
    free(m.tree)


cdef void model_rebuild(Model *m) noexcept nogil:
    cdef int64_t i, j
    m.total = 0
    for i in range(m.size + 1):
        m.tree[i] = 0
    for i in range(m.n):
        m.tree[i + 1] = m.counts[i]
        m.total += m.counts[i]
    for i in range(1, m.size + 1):
        j = i + (i & -i)
        if j <= m.size:
            m.tree[j] += m.tree[i]


cdef inline int64_t model_prefix(Model *m, int64_t i) noexcept nogil:
    cdef int64_t s = 0
    while i > 0:
        s += m.tree[i]
        i -= i & -i
    return s


cdef inline int64_t model_find(Model *m, int64_t target, int64_t *cum) noexcept nogil:
    cdef int64_t pos = 0, rem = target, step = m.size, nxt
    while step:
        nxt = pos + step
        if m.tree[nxt] <= rem:
            pos = nxt
            rem -= m.tree[nxt]
        step >>= 1
    cum[0] = target - rem
    return pos


cdef inline void model_update(Model *m, int64_t s) noexcept nogil:
    cdef int64_t i = s + 1
    m.counts[s] += 1
    while i <= m.size:
        m.tree[i] += 1
        i += i & -i
    m.total += 1
    if m.total > MAX_TOTAL:
        for i in range(m.n):
            m.counts[i] = (m.counts[i] + 1) >> 1
        model_rebuild(m)


cdef void model_store(Model *m, int64_t[::1] counts) noexcept:
    cdef int64_t i
    for i in range(m.n):
        counts[i] = m.counts[i]


cdef struct Encoder:
    uint64_t low
    uint32_t rng
    uint32_t cache
    int64_t cache_size
    int skip_first
    uint8_t *buf
    int64_t pos
    int64_t cap


cdef int enc_put(Encoder *e, uint8_t b) except -1:
    cdef uint8_t *nb
    if e.pos == e.cap:
        e.cap = e.cap * 2 + 64
        nb = <uint8_t *> realloc(e.buf, e.cap)
        if nb == NULL:
            raise MemoryError()
        e.buf = nb
    e.buf[e.pos] = b
    e.pos += 1
    return 0


cdef int shift_low(Encoder *e) except -1:
    cdef uint32_t carry, temp
    if (e.low & MASK32) < 0xFF000000 or e.low > MASK32:
        carry = <uint32_t> (e.low >> 32)
        temp = e.cache
        while True:
            if e.skip_first:
                e.skip_first = 0
            else:
                enc_put(e, <uint8_t> ((temp + carry) & 0xFF))
            temp = 0xFF
            e.cache_size -= 1
            if e.cache_size == 0:
                break
        e.cache = <uint32_t> ((e.low >> 24) & 0xFF)
    e.cache_size += 1
    e.low = (e.low & 0x00FFFFFF) << 8
    return 0


def encode_symbols(symbols, cnp.ndarray counts):
    """Encode ``symbols``; ``counts`` (int64 array) is updated in place."""
    cdef int64_t[::1] cview = counts
    cdef int64_t[::1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
    cdef Model m
    cdef Encoder e
    cdef int64_t k, s, nsym = sym.shape[0]
    cdef uint32_t r
    cdef int64_t alphabet = cview.shape[0]
    for k in range(nsym):
        if sym[k] < 0 or sym[k] >= alphabet:
            raise CoderError(f"symbol {sym[k]} outside alphabet of size {alphabet}")
    model_init(&m, cview)
    e.low = 0
    e.rng = 0xFFFFFFFF
    e.cache = 0
    e.cache_size = 1
    e.skip_first = 1
    e.cap = nsym // 2 + 64
    e.pos = 0
    e.buf = <uint8_t *> malloc(e.cap)
    try:
        if e.buf == NULL:
            raise MemoryError()
        for k in range(nsym):
            s = sym[k]
            r = <uint32_t> (e.rng // <uint64_t> m.total)
            e.low += <uint64_t> r * <uint64_t> model_prefix(&m, s)
            e.rng = r * <uint32_t> m.counts[s]
            while e.rng < TOP:
                e.rng <<= 8
                shift_low(&e)
            model_update(&m, s)
        for k in range(5):
            shift_low(&e)
        model_store(&m, cview)
        return (<char *> e.buf)[:e.pos]
    finally:
        free(e.buf)
        model_free(&m)


def decode_symbols(data, int64_t count, cnp.ndarray counts):
    """Decode ``count`` symbols; ``counts`` is updated in place."""
    cdef const uint8_t[::1] buf = bytes(data)
    cdef int64_t[::1] cview = counts
    cdef int64_t n = buf.shape[0]
    cdef Model m
    cdef uint32_t code, rng, r
    cdef int64_t k, s, target, cum, pos
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] oview = out
    if count == 0:
        return out
    if n < 4:
        raise TruncatedStreamError("stream shorter than the 4-byte preamble")
    code = (<uint32_t> buf[0] << 24) | (<uint32_t> buf[1] << 16) | (<uint32_t> buf[2] << 8) | buf[3]
    pos = 4
    rng = 0xFFFFFFFF
    model_init(&m, cview)
    try:
        for k in range(count):
            r = rng // <uint32_t> m.total
            target = code // r
            if target >= m.total:
                raise CoderError("corrupt range-coder stream")
            s = model_find(&m, target, &cum)
            code -= r * <uint32_t> cum
            rng = r * <uint32_t> m.counts[s]
            while rng < TOP:
                if pos >= n:
                    raise TruncatedStreamError("range-coder stream truncated")
                code = (code << 8) | buf[pos]
                pos += 1
                rng <<= 8
            oview[k] = s
            model_update(&m, s)
        model_store(&m, cview)
    finally:
        model_free(&m)
    return out


def reconstruct_tiles(cnp.ndarray plane, rows, cols, sizes, residuals):
    """Invert the DPCM prediction tile by tile, filling ``plane`` in place."""
    cdef int64_t[:, :, ::1] p = plane
    cdef int64_t[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef int64_t[::1] cv = np.ascontiguousarray(cols, dtype=np.int64)
    cdef int64_t[::1] nv = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef int64_t[:, ::1] ev = np.ascontiguousarray(residuals, dtype=np.int64)
    cdef int64_t t, i, j, n, c, a, b, v, pred
    cdef int64_t kch = p.shape[2]
    with nogil:
        for t in range(rv.shape[0]):
            i = rv[t]
            j = cv[t]
            n = nv[t]
            for c in range(kch):
                if i == 0 and j == 0:
                    pred = 0
                elif i == 0:
                    pred = p[0, j - 1, c]
                else:
                    pred = p[i - 1, j, c]
                v = ev[t, c] + pred
                for a in range(i, i + n):
                    for b in range(j, j + n):
                        p[a, b, c] = v
    return plane
