"""The nilpotent-matrix data generator and its complexity knob.

Labels are polynomials of the features whose total-degree-n terms carry an
epsilon^n prefactor: small epsilon means essentially low-order data, large
epsilon makes the high-order structure matter.

Run:  python demos/03_generate_data.py
"""

import numpy as np

from mpslab import (TargetSpec, build_nilpotent, build_target_mps,
                    generate_dataset)
from mpslab.datagen import save_dataset_csv

# the generator matrix: epsilon on the first superdiagonal, powers walk it
# toward the corner until it vanishes
m = build_nilpotent(4, epsilon=0.5)
print("M =\n", m)
print("M^2 =\n", m @ m)
print("M^4 =\n", np.linalg.matrix_power(m, 4), " (nilpotent)")

# a 6-feature target with the full bond profile
spec = TargetSpec(n_sites=6, phys_dim=3, epsilon=0.3, chi_target=27, seed=0)
target = build_target_mps(spec)
print("\ntarget MPS bonds:", target.bond_dims)

# label spread grows with epsilon (same seeds everywhere)
for eps in (0.1, 0.3, 1.0):
    d = generate_dataset(TargetSpec(epsilon=eps, seed=0), 2000, seed=42)
    print(f"eps = {eps}: raw label std = {d.label_std:10.3f} "
          f"(normalized to mean 0 / std 1 for training)")

d = generate_dataset(spec, 300, seed=7)
save_dataset_csv(d, "demo_dataset.csv")
print("\nwrote demo_dataset.csv with", d.n_samples, "samples")
