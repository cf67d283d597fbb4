"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or when
``HPCYCLE_PURE_PYTHON=1``). Every function here has the same signature and
semantics as its counterpart in ``_ext.pyx``.
"""

from itertools import combinations, islice

import numpy as np

_LOW_BITS = 18
_CHUNK = 1 << 16


def _weighted_sums(x, wpos, wneg, wsum):
    flipped = np.bitwise_count(x & wpos).sum(axis=-1, dtype=np.int64)
    flipped -= np.bitwise_count(x & wneg).sum(axis=-1, dtype=np.int64)
    return wsum - 2 * flipped


def _subset_xors(cols):
    """All 2**k subset xors of ``cols`` (k, W), indexed by subset bitmask."""
    k, nw = cols.shape
    out = np.zeros((1 << k, nw), dtype=np.uint64)
    for j in range(k):
        half = 1 << j
        out[half : 2 * half] = out[:half] ^ cols[j]
    return out


def subset_sum_census(cols, wpos, wneg, wsum, target):
    cols = np.ascontiguousarray(cols, dtype=np.uint64)
    wpos = np.asarray(wpos, dtype=np.uint64)
    wneg = np.asarray(wneg, dtype=np.uint64)
    k, nw = cols.shape
    if k > 62:
        raise ValueError("census limited to 62 columns")
    low = min(k, _LOW_BITS)
    low_x = _subset_xors(cols[:low])
    low_size = np.bitwise_count(np.arange(1 << low, dtype=np.uint64)).astype(np.int64)
    high_cols = cols[low:]
    counts = np.zeros(k + 1, dtype=np.int64)
    h = np.zeros(nw, dtype=np.uint64)
    state = 0
    hsize = 0
    unchanged = target == wsum and not wneg.any()
    if unchanged:
        # all-positive weights: the sum is unchanged iff no weighted bit flipped
        low_x &= wpos
        high_cols = high_cols & wpos
    for i in range(1 << (k - low)):
        if i:
            j = (i & -i).bit_length() - 1
            state ^= 1 << j
            hsize += 1 if (state >> j) & 1 else -1
            h ^= high_cols[j]
        if unchanged:
            hit = np.all(low_x == h, axis=1) if nw > 1 else low_x[:, 0] == h[0]
        else:
            hit = _weighted_sums(low_x ^ h, wpos, wneg, wsum) == target
        counts += np.bincount(low_size[hit] + hsize, minlength=k + 1)
    return counts


def subset_sum_count(cols, wpos, wneg, wsum, target, q):
    cols = np.ascontiguousarray(cols, dtype=np.uint64)
    wpos = np.asarray(wpos, dtype=np.uint64)
    wneg = np.asarray(wneg, dtype=np.uint64)
    k, nw = cols.shape
    if q < 0 or q > k:
        return 0
    if q == 0:
        return int(_weighted_sums(np.zeros(nw, dtype=np.uint64), wpos, wneg, wsum) == target)
    count = 0
    combos = combinations(range(k), q)
    while True:
        block = np.array(list(islice(combos, _CHUNK)), dtype=np.intp)
        if block.size == 0:
            break
        x = np.bitwise_xor.reduce(cols[block], axis=1)
        count += int(np.count_nonzero(_weighted_sums(x, wpos, wneg, wsum) == target))
    return count


def _relax(s, dt, dw, inv_t1, inv_t2):
    phi = dw * dt
    c, sn = np.cos(phi), np.sin(phi)
    d2 = np.exp(-dt * inv_t2)
    x, y = s[..., 0].copy(), s[..., 1].copy()
    s[..., 0] = (x * c - y * sn) * d2
    s[..., 1] = (x * sn + y * c) * d2
    s[..., 2] = 1.0 - (1.0 - s[..., 2]) * np.exp(-dt * inv_t1)


def propagate(rot, pulse_times, readout, detunings, inv_t1, inv_t2):
    rot = np.asarray(rot, dtype=np.float64)
    detunings = np.asarray(detunings, dtype=np.float64)
    n_rows, n_pulses = rot.shape[:2]
    n_members = detunings.shape[0]
    s = np.zeros((n_rows, n_members, 3))
    s[..., 2] = 1.0
    dw = detunings[None, :]
    tprev = 0.0
    for p in range(n_pulses):
        _relax(s, pulse_times[p] - tprev, dw, inv_t1, inv_t2)
        tprev = pulse_times[p]
        s = np.einsum("rij,rej->rei", rot[:, p], s)
    out = np.empty((n_rows, len(readout), 3))
    for k, t in enumerate(readout):
        post = s.copy()
        _relax(post, t - tprev, dw, inv_t1, inv_t2)
        out[:, k] = post.sum(axis=1) / n_members
    return out
