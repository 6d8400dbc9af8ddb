"""Closed-form training and the optimal bond dimension.

Solving the regularized normal equations in the full 3^6-dimensional
feature space and compressing the solution to bond dimension chi traces
out a U-shaped test loss: too small underfits, too large overfits the
finite training set.

Run:  python demos/04_inversion_and_bond_scan.py   (about a minute)
"""

import numpy as np

from mpslab import FeatureMap, TargetSpec, generate_dataset
from mpslab.dmrg import frame_labels
from mpslab.exact import (build_design_system, prediction_loss,
                          solve_full_weight)
from mpslab.features import featurize_batch
from mpslab.mps import compress

fmap = FeatureMap(dim=3)
spec = TargetSpec(epsilon=0.3, seed=0)
test = generate_dataset(spec, 1024, seed=999_983)
phi_test = featurize_batch(fmap, test.features)

chis = list(range(2, 28))
replicates = 10
losses = np.zeros((replicates, len(chis)))

for rep in range(replicates):
    train = generate_dataset(spec, 300, seed=1000 + rep)
    # one 729x729 solve per training set, then one compression per chi
    full = solve_full_weight(build_design_system(train, fmap, ridge=1e-6))
    y_test = frame_labels(test, train)
    for k, chi in enumerate(chis):
        w, _ = compress(full, chi)
        pred = w.evaluate_batch(phi_test)
        losses[rep, k] = 0.5 * np.mean((pred - y_test) ** 2)

mean = losses.mean(axis=0)
std = losses.std(axis=0, ddof=1)
best = int(np.argmin(mean))

print("chi   mean test loss   (std over training sets)")
for k, chi in enumerate(chis):
    marker = "  <-- chi*" if k == best else ""
    bar = "#" * int(40 * mean[k] / mean.max())
    print(f"{chi:>3}   {mean[k]:12.5f}   ({std[k]:.5f})  {bar}{marker}")

print(f"\noptimal bond dimension chi* = {chis[best]}; the maximum-capacity "
      f"model (chi=27) is {mean[-1] / mean[best]:.1f}x worse on unseen data")
