"""Converting dense weights: the Frobenius-nearest circulant projection.

Averaging a matrix along its cyclic diagonals gives the circulant matrix
closest to it in Frobenius norm. Applied block-by-block to a dense kernel,
this turns a trained unstructured layer into a circulant one; the reported
squared error is the conversion-quality signal to watch before retraining.
"""

import numpy as np

from circconv import (
    PartitionConfig,
    circulant_from_fiber,
    expand,
    project_matrix,
    project_tensor,
)

rng = np.random.default_rng(2)

m = rng.standard_normal((4, 4))
w = project_matrix(m)
print("matrix:\n", np.round(m, 3))
print("nearest circulant first row:", np.round(w, 3))
best = np.linalg.norm(m - circulant_from_fiber(w))
print(f"distance to nearest circulant: {best:.4f}")

trials = 10_000
beaten = sum(
    np.linalg.norm(m - circulant_from_fiber(w + rng.standard_normal(4) * s)) > best
    for s in rng.choice([1e-3, 1e-1, 1.0], size=trials)
)
print(f"projection beats {beaten}/{trials} randomly perturbed candidates")

# block-wise on a whole kernel: error grows with how non-circulant the
# kernel is, and vanishes on an already-circulant one
config = PartitionConfig(n=4, c_in=8, c_out=8)
dense = rng.standard_normal((3, 3, 8, 8))
projected, report = project_tensor(dense, config)
print(f"\nrandom kernel: total squared projection error {report.total_sq_error:.3f}")

circulant_kernel = expand(projected)
_, report2 = project_tensor(circulant_kernel, config)
print(f"already-circulant kernel: error {report2.total_sq_error:.2e} (fixed point)")
