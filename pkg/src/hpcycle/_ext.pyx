# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Signatures mirror :mod:`hpcycle._kernels_py` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int64_t _weighted_sum(const uint64_t* x, const uint64_t* wpos,
                                  const uint64_t* wneg, int64_t wsum, Py_ssize_t nw) noexcept nogil:
    cdef Py_ssize_t w
    cdef int64_t flipped = 0
    for w in range(nw):
        flipped += __builtin_popcountll(x[w] & wpos[w]) - __builtin_popcountll(x[w] & wneg[w])
    return wsum - 2 * flipped


def subset_sum_census(const uint64_t[:, ::1] cols, const uint64_t[::1] wpos,
                      const uint64_t[::1] wneg, int64_t wsum, int64_t target):
    cdef Py_ssize_t k = cols.shape[0]
    cdef Py_ssize_t nw = cols.shape[1]
    if k > 62:
        raise ValueError("census limited to 62 columns")
    counts_arr = np.zeros(k + 1, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef uint64_t[::1] xbuf = np.zeros(nw, dtype=np.uint64)
    cdef uint64_t* x = &xbuf[0]
    cdef const uint64_t* cp = &cols[0, 0]
    cdef const uint64_t* wp = &wpos[0]
    cdef const uint64_t* wn = &wneg[0]
    cdef uint64_t i, total = (<uint64_t>1) << k
    cdef uint64_t state = 0
    cdef uint64_t x0 = 0, p0 = wpos[0], n0 = wneg[0]
    cdef int j
    cdef Py_ssize_t w, size = 0
    if nw == 1 and n0 == 0 and target == wsum and k > 0:
        return _census_join(cols[:, 0], p0, k)
    with nogil:
        if _weighted_sum(x, wp, wn, wsum, nw) == target:
            counts[0] += 1
        if nw == 1:
            i = 1
            while i < total:
                j = __builtin_ctzll(i)
                state ^= (<uint64_t>1) << j
                size += 1 if (state >> j) & 1 else -1
                x0 ^= cp[j]
                if wsum - 2 * (__builtin_popcountll(x0 & p0) - __builtin_popcountll(x0 & n0)) == target:
                    counts[size] += 1
                i += 1
        else:
            i = 1
            while i < total:
                j = __builtin_ctzll(i)
                state ^= (<uint64_t>1) << j
                size += 1 if (state >> j) & 1 else -1
                for w in range(nw):
                    x[w] ^= cp[j * nw + w]
                if _weighted_sum(x, wp, wn, wsum, nw) == target:
                    counts[size] += 1
                i += 1
    return counts_arr


cdef _census_join(const uint64_t[:] col, uint64_t mask, Py_ssize_t k):
    """Census for all-positive weights: count subsets whose xor vanishes on ``mask``.

    Meet in the middle: the masked xors of every subset of the first ``low``
    columns are tabulated with a size histogram per distinct value, then each
    subset of the remaining columns (Gray-code order) looks up its partner.
    """
    cdef Py_ssize_t low = min(k, 16)
    cdef Py_ssize_t high = k - low
    cdef Py_ssize_t nlow = (<Py_ssize_t>1) << low
    lx_arr = np.zeros(nlow, dtype=np.uint64)
    cdef uint64_t[::1] lx = lx_arr
    cdef Py_ssize_t i, j, half
    for j in range(low):
        half = (<Py_ssize_t>1) << j
        for i in range(half):
            lx[half + i] = lx[i] ^ (col[j] & mask)
    sizes = np.bitwise_count(np.arange(nlow, dtype=np.uint64)).astype(np.intp)
    uniq_arr, inverse = np.unique(lx_arr, return_inverse=True)
    hist_arr = np.zeros((len(uniq_arr), low + 1), dtype=np.int64)
    np.add.at(hist_arr, (inverse, sizes), 1)
    cdef const uint64_t[::1] uniq = uniq_arr
    cdef const int64_t[:, ::1] hist = hist_arr
    counts_arr = np.zeros(k + 1, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef Py_ssize_t nu = len(uniq_arr)
    cdef uint64_t hx = 0, state = 0, total = (<uint64_t>1) << high, t
    cdef Py_ssize_t size = 0, lo, hi, mid, s
    cdef int b
    with nogil:
        t = 0
        while t < total:
            if t > 0:
                b = __builtin_ctzll(t)
                state ^= (<uint64_t>1) << b
                size += 1 if (state >> b) & 1 else -1
                hx ^= col[low + b] & mask
            lo = 0
            hi = nu
            while lo < hi:
                mid = (lo + hi) >> 1
                if uniq[mid] < hx:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < nu and uniq[lo] == hx:
                for s in range(low + 1):
                    counts[size + s] += hist[lo, s]
            t += 1
    return counts_arr


def subset_sum_count(const uint64_t[:, ::1] cols, const uint64_t[::1] wpos,
                     const uint64_t[::1] wneg, int64_t wsum, int64_t target, int q):
    cdef Py_ssize_t k = cols.shape[0]
    cdef Py_ssize_t nw = cols.shape[1]
    if q < 0 or q > k:
        return 0
    cdef const uint64_t* wp = &wpos[0]
    cdef const uint64_t* wn = &wneg[0]
    # prefix row d holds the xor of the first d chosen columns
    cdef uint64_t[:, ::1] prefix_arr = np.zeros((q + 1, nw), dtype=np.uint64)
    cdef uint64_t* prefix = &prefix_arr[0, 0]
    if q == 0:
        return int(_weighted_sum(prefix, wp, wn, wsum, nw) == target)
    cdef Py_ssize_t[::1] idx = np.zeros(q, dtype=np.intp)
    cdef const uint64_t* cp = &cols[0, 0]
    cdef int64_t count = 0
    cdef Py_ssize_t d, w, c
    with nogil:
        for d in range(q):
            idx[d] = d
            for w in range(nw):
                prefix[(d + 1) * nw + w] = prefix[d * nw + w] ^ cp[d * nw + w]
        while True:
            if _weighted_sum(prefix + q * nw, wp, wn, wsum, nw) == target:
                count += 1
            d = q - 1
            while d >= 0 and idx[d] == k - q + d:
                d -= 1
            if d < 0:
                break
            idx[d] += 1
            for c in range(d, q):
                if c > d:
                    idx[c] = idx[c - 1] + 1
                for w in range(nw):
                    prefix[(c + 1) * nw + w] = prefix[c * nw + w] ^ cp[idx[c] * nw + w]
    return count


cdef inline void _relax(double* s, double dt, double dw, double inv_t1, double inv_t2) noexcept nogil:
    cdef double phi = dw * dt
    cdef double c = cos(phi)
    cdef double sn = sin(phi)
    cdef double d2 = exp(-dt * inv_t2)
    cdef double x = s[0]
    cdef double y = s[1]
    s[0] = (x * c - y * sn) * d2
    s[1] = (x * sn + y * c) * d2
    s[2] = 1.0 - (1.0 - s[2]) * exp(-dt * inv_t1)


def propagate(const double[:, :, :, ::1] rot, const double[::1] pulse_times,
              const double[::1] readout, const double[::1] detunings,
              double inv_t1, double inv_t2):
    cdef Py_ssize_t R = rot.shape[0]
    cdef Py_ssize_t P = rot.shape[1]
    cdef Py_ssize_t K = readout.shape[0]
    cdef Py_ssize_t E = detunings.shape[0]
    out_arr = np.zeros((R, K, 3), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double s[3]
    cdef double t[3]
    cdef double post[3]
    cdef double dw, tprev, scale = 1.0 / E
    cdef Py_ssize_t r, e, p, k, a
    with nogil:
        for r in range(R):
            for e in range(E):
                dw = detunings[e]
                s[0] = 0.0
                s[1] = 0.0
                s[2] = 1.0
                tprev = 0.0
                for p in range(P):
                    _relax(s, pulse_times[p] - tprev, dw, inv_t1, inv_t2)
                    tprev = pulse_times[p]
                    for a in range(3):
                        t[a] = rot[r, p, a, 0] * s[0] + rot[r, p, a, 1] * s[1] + rot[r, p, a, 2] * s[2]
                    s[0] = t[0]
                    s[1] = t[1]
                    s[2] = t[2]
                for k in range(K):
                    post[0] = s[0]
                    post[1] = s[1]
                    post[2] = s[2]
                    _relax(post, readout[k] - tprev, dw, inv_t1, inv_t2)
                    for a in range(3):
                        out[r, k, a] += post[a]
            for k in range(K):
                for a in range(3):
                    out[r, k, a] *= scale
    return out_arr
