"""Block-circulant kernels in five minutes.

A dense conv kernel (W1, H1, C_in, C_out) is partitioned along the channel
pair into N x N blocks, and each block is constrained to be circulant: one
length-N fiber determines the whole block. The kernel is then stored as a
base tensor of shape (W1, H1, R*N, S), cutting parameters by a factor of N.
"""

import numpy as np

from circconv import CirculantBaseTensor, PartitionConfig, expand

rng = np.random.default_rng(0)

# a 1x1 kernel with 8 input and 8 output channels, partitioned into 4x4 blocks
config = PartitionConfig(n=4, c_in=8, c_out=8)
print(f"partition: N={config.n}, R={config.r} input blocks, S={config.s} output blocks")

base = CirculantBaseTensor(rng.integers(0, 10, (1, 1, 8, 2)).astype(float), config)
dense = expand(base)

print(f"\nfree parameters: {base.num_free_parameters}")
print(f"dense parameters: {dense.size}  (ratio {dense.size // base.num_free_parameters}x)")

print("\ntop-left 4x4 block of the expanded kernel (rows are cyclic shifts):")
print(dense[0, 0, :4, :4])
print("\nits defining fiber (the first row):")
print(base.base[0, 0, :4, 0])

# every entry obeys dense[c0, c2] = base[r*N + (c2 - c0) % N, s]
n = config.n
ok = all(
    dense[0, 0, c0, c2]
    == base.base[0, 0, (c0 // n) * n + (c2 - c0) % n, c2 // n]
    for c0 in range(8)
    for c2 in range(8)
)
print(f"\nindex rule holds at every entry: {ok}")
