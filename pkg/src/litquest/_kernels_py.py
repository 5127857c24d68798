"""Pure-Python fallback for the string-alignment kernels.

Same contract as the compiled module, roughly 50-100x slower. Used when the
extension is unavailable or when LITQUEST_PURE_PY=1 forces it.
"""


def lcs_subsequence_len(a: str, b: str) -> int:
    """Length of the longest common subsequence of two strings."""
    if not a or not b:
        return 0
    if len(b) > len(a):  # inner loop over the shorter string
        a, b = b, a
    lb = len(b)
    prev = [0] * (lb + 1)
    for ch in a:
        cur = [0]
        append = cur.append
        for j in range(lb):
            if ch == b[j]:
                append(prev[j] + 1)
            else:
                p = prev[j + 1]
                c = cur[j]
                append(p if p >= c else c)
        prev = cur
    return prev[lb]


def common_substring_len(a: str, b: str) -> int:
    """Length of the longest common contiguous substring of two strings."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    lb = len(b)
    prev = [0] * (lb + 1)
    best = 0
    for ch in a:
        cur = [0]
        append = cur.append
        for j in range(lb):
            if ch == b[j]:
                run = prev[j] + 1
                append(run)
                if run > best:
                    best = run
            else:
                append(0)
        prev = cur
    return best
