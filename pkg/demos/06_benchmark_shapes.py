"""
How signing cost scales
=======================

Signing hashes the attribute to a fixed-size digest first, so the value's
length hardly matters. Signing several attributes is one BLS operation per
attribute, so total time grows linearly with the count.
"""

import numpy as np

from ehr_abms import bench

length = bench.bench_length([10, 100, 1000, 10000], trials=30)
print(length.table())
print()

count = bench.bench_count([1, 3, 5, 7, 9], trials=30)
print(count.table())
print()

xs = np.array([p.x for p in count.points], dtype=float)
ys = np.array([p.verify_ms for p in count.points])
slope, intercept = np.polyfit(xs, ys, 1)
print(f"verify total ~ {slope:.2f} ms per attribute + {intercept:.2f} ms")

for verdict in bench.shape_verdicts(length) + bench.shape_verdicts(count):
    print(verdict.line())
