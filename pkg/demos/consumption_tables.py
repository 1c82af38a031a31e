"""
How entanglement consumption grows with chain count
===================================================

Closed forms next to the sampled tree, first for generic angles and then
for angles on a dyadic grid, where every chain stops within a fixed number
of teleports.
"""

import numpy as np

from rotchain.tree import (ConcatSpec, binary_e, closed_form_c, initial_channels,
                           monte_carlo_consumption)

rng = np.random.default_rng(1)

print(" n   exact   sampled   99% ci")
for n in range(1, 7):
    stats = monte_carlo_consumption(ConcatSpec.uniform(n), 200_000, rng)
    print(f"{n:2d} {closed_form_c(n):7d} {stats.mean_channels:9.2f}   +-{stats.ci99:.2f}")

# Each extra chain multiplies the cost by roughly 1 + sqrt(2).
print("c(12)/c(11) =", closed_form_c(12) / closed_form_c(11))

print("\nbinary angles, one chain plus the localization ebit")
for depth in range(1, 11):
    print(f"D={depth:2d}  mean ebits {binary_e(depth):.5f}")

print("\nchannels prepared up front for n binary chains at depth 7")
for n in range(1, 5):
    print(f"n={n}  {initial_channels(n, 7)}")
