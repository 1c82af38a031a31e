"""
Chains against a truncated Vaidman tree
=======================================

Vaidman's recursive scheme succeeds with probability 1/16 per level for two
qubits, and the entanglement it must pre-share grows fifteenfold per level.
The split Cartan scheme always succeeds at a fixed expected cost.
"""

import numpy as np

from rotchain.protocols import VaidmanTree, truncated_vaidman, vaidman_success_probability
from rotchain.synthesis import CartanParams, cartan_program, program_concat_spec
from rotchain.tree import expected_consumption

rng = np.random.default_rng(5)
params = CartanParams.random(rng)
u = params.unitary()

print("rotation chains:", expected_consumption(program_concat_spec(cartan_program(params)))[1],
      "ebits, always succeeds")

for depth in range(1, 5):
    wins = np.mean([truncated_vaidman(u, 2, depth, rng).success for _ in range(4000)])
    ebits = VaidmanTree(u, 2, depth, 1).ebits
    print(f"depth {depth}: {ebits:6d} ebits, success {wins:.3f} "
          f"(predicted {vaidman_success_probability(2, depth):.3f})")
