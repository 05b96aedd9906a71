# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled modular arithmetic kernels.

Word-size moduli (below 2**63) run in native 64-bit arithmetic with a 128-bit
intermediate product. Larger moduli defer to the pure-Python kernels.
"""

from decwf import _kernels_py as _py

cdef extern from *:
    """
    typedef unsigned long long u64;
    static inline u64 dw_mulmod(u64 a, u64 b, u64 m) {
        return (u64)(((unsigned __int128)a * b) % m);
    }
    static inline u64 dw_powmod(u64 b, u64 e, u64 m) {
        u64 r = 1 % m;
        b %= m;
        while (e) {
            if (e & 1) r = dw_mulmod(r, b, m);
            b = dw_mulmod(b, b, m);
            e >>= 1;
        }
        return r;
    }
    """
    ctypedef unsigned long long u64
    u64 dw_mulmod(u64 a, u64 b, u64 m) nogil
    u64 dw_powmod(u64 b, u64 e, u64 m) nogil

cdef object WORD_LIMIT = 1 << 63


cdef inline bint _small(object m):
    return 1 < m < WORD_LIMIT


cdef u64 _inv(u64 a, u64 m):
    # extended Euclid on signed 128-bit values; m is prime in every caller
    cdef long long t = 0, newt = 1
    cdef long long r = <long long>m, newr = <long long>a, quo, tmp
    while newr != 0:
        quo = r // newr
        tmp = t - quo * newt
        t = newt
        newt = tmp
        tmp = r - quo * newr
        r = newr
        newr = tmp
    if r != 1:
        raise ValueError("base is not invertible for the given modulus")
    if t < 0:
        t += <long long>m
    return <u64>t


def powmod(base, exp, mod):
    if not _small(mod) or exp < 0 or exp >= WORD_LIMIT or base < 0:
        return _py.powmod(base, exp, mod)
    return dw_powmod(<u64>(base % mod), <u64>exp, <u64>mod)


def multi_powmod(bases, exps, mod):
    if not _small(mod):
        return _py.multi_powmod(bases, exps, mod)
    cdef u64 m = mod
    cdef u64 acc = 1 % m
    for b, e in zip(bases, exps):
        if e < 0 or e >= WORD_LIMIT or b < 0:
            return _py.multi_powmod(bases, exps, mod)
        acc = dw_mulmod(acc, dw_powmod(<u64>(b % mod), <u64>e, m), m)
    return acc


def poly_eval(coeffs, x, mod):
    if not _small(mod):
        return _py.poly_eval(coeffs, x, mod)
    cdef u64 m = mod
    cdef u64 xv = x % mod
    cdef u64 acc = 0
    for c in reversed(coeffs):
        acc = (dw_mulmod(acc, xv, m) + <u64>(c % mod)) % m
    return acc


def commit_eval(commitments, index, p, q):
    if not (_small(p) and _small(q)):
        return _py.commit_eval(commitments, index, p, q)
    cdef u64 pp = p, qq = q
    cdef u64 idx = index % q
    cdef u64 acc = 1 % pp
    cdef u64 e = 1 % qq
    for c in commitments:
        acc = dw_mulmod(acc, dw_powmod(<u64>(c % p), e, pp), pp)
        e = dw_mulmod(e, idx, qq)
    return acc


def lagrange_at_zero(indices, q):
    if not _small(q):
        return _py.lagrange_at_zero(indices, q)
    cdef u64 qq = q
    cdef list idx = [i % q for i in indices]
    cdef Py_ssize_t n = len(idx), a, b
    cdef u64 num, den, ii, jj
    out = []
    for a in range(n):
        ii = idx[a]
        num = 1
        den = 1
        for b in range(n):
            if b != a:
                jj = idx[b]
                num = dw_mulmod(num, jj, qq)
                den = dw_mulmod(den, (jj + qq - ii) % qq, qq)
        out.append(dw_mulmod(num, _inv(den, qq), qq))
    return out
