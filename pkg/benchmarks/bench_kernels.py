"""Compare the compiled string kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]

Workloads mirror the miner's hot path: sentence-length lowercase strings
with shared fragments, scored pairwise. Reports best-of-N wall time per
backend and the speedup.
"""

import argparse
import random
import time

from litquest import kernels


def make_pairs(count: int, length: int, seed: int) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    words = ["the", "river", "dark", "light", "stone", "voice", "morning",
             "quiet", "letter", "garden", "winter", "glass", "memory"]
    pairs = []
    for _ in range(count):
        base = " ".join(rng.choice(words) for _ in range(length))
        mutated = list(base)
        for _ in range(max(1, len(base) // 20)):
            mutated[rng.randrange(len(mutated))] = rng.choice("abcdefg ")
        pairs.append((base, "".join(mutated)))
    return pairs


def bench(fn, pairs, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled backend not built; showing pure timings only")

    workloads = [
        ("short (8 words)", make_pairs(400, 8, 0)),
        ("sentence (16 words)", make_pairs(200, 16, 1)),
        ("long (40 words)", make_pairs(50, 40, 2)),
    ]
    header = f"{'kernel':<22}{'workload':<22}" + "".join(
        f"{name:>12}" for name in sorted(backends)
    ) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for kernel_name in ("lcs_subsequence_len", "common_substring_len"):
        for label, pairs in workloads:
            times = {
                name: bench(getattr(mod, kernel_name), pairs, args.repeats)
                for name, mod in backends.items()
            }
            row = f"{kernel_name:<22}{label:<22}"
            for name in sorted(backends):
                row += f"{times[name] * 1000:>10.1f}ms"
            if "compiled" in times and "pure" in times:
                row += f"{times['pure'] / times['compiled']:>9.1f}x"
            print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
