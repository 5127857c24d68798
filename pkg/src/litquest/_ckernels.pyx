# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled string-alignment kernels.

These two dynamic programs are the hot inner loops of quote mining: every
candidate sentence pair runs one of them. Both operate on unicode code
points (str is re-encoded as UTF-32 so multi-byte characters count once).
"""

from libc.stdlib cimport free, malloc


cdef const unsigned int[::1] _codepoints(s):
    return memoryview(s.encode("utf-32-le")).cast("I")


cdef Py_ssize_t _subseq(const unsigned int[::1] a, const unsigned int[::1] b) nogil:
    cdef Py_ssize_t la = a.shape[0]
    cdef Py_ssize_t lb = b.shape[0]
    cdef Py_ssize_t i, j, best
    cdef Py_ssize_t *prev
    cdef Py_ssize_t *cur
    cdef Py_ssize_t *tmp
    cdef unsigned int ai

    prev = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    cur = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    if prev == NULL or cur == NULL:
        if prev != NULL:
            free(prev)
        if cur != NULL:
            free(cur)
        return -1

    for j in range(lb + 1):
        prev[j] = 0
    cur[0] = 0
    for i in range(la):
        ai = a[i]
        for j in range(lb):
            if ai == b[j]:
                cur[j + 1] = prev[j] + 1
            elif prev[j + 1] >= cur[j]:
                cur[j + 1] = prev[j + 1]
            else:
                cur[j + 1] = cur[j]
        tmp = prev
        prev = cur
        cur = tmp
    best = prev[lb]
    free(prev)
    free(cur)
    return best


cdef Py_ssize_t _substring(const unsigned int[::1] a, const unsigned int[::1] b) nogil:
    cdef Py_ssize_t la = a.shape[0]
    cdef Py_ssize_t lb = b.shape[0]
    cdef Py_ssize_t i, j, best, diag, here
    cdef Py_ssize_t *row
    cdef unsigned int ai

    row = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    if row == NULL:
        return -1
    for j in range(lb + 1):
        row[j] = 0

    best = 0
    for i in range(la):
        ai = a[i]
        diag = 0  # row value at j before this row overwrote it
        for j in range(lb):
            here = row[j + 1]
            if ai == b[j]:
                row[j + 1] = diag + 1
                if row[j + 1] > best:
                    best = row[j + 1]
            else:
                row[j + 1] = 0
            diag = here
    free(row)
    return best


def lcs_subsequence_len(a: str, b: str) -> int:
    """Length of the longest common subsequence of two strings."""
    if not a or not b:
        return 0
    cdef const unsigned int[::1] av = _codepoints(a)
    cdef const unsigned int[::1] bv = _codepoints(b)
    cdef Py_ssize_t out
    with nogil:
        out = _subseq(av, bv)
    if out < 0:
        raise MemoryError("kernel scratch allocation failed")
    return out


def common_substring_len(a: str, b: str) -> int:
    """Length of the longest common contiguous substring of two strings."""
    if not a or not b:
        return 0
    cdef const unsigned int[::1] av = _codepoints(a)
    cdef const unsigned int[::1] bv = _codepoints(b)
    cdef Py_ssize_t out
    with nogil:
        out = _substring(av, bv)
    if out < 0:
        raise MemoryError("kernel scratch allocation failed")
    return out
