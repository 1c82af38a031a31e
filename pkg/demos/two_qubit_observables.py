"""
Measuring two-qubit observables without talking
===============================================

Each scheme below measures a fixed orthonormal basis on a state shared by two
parties. The label comes only from combining both transcripts afterwards.
"""

import numpy as np
from collections import Counter

from rotchain.protocols import ObservableSpec, bell_scheme, run_scheme
from rotchain.statevector import StateVector
from rotchain.synthesis import program_concat_spec
from rotchain.tree import expected_consumption

rng = np.random.default_rng(3)

schemes = {
    "bell": bell_scheme(),
    "twisted": ObservableSpec("twisted", {"theta": 1.1, "phi": 0.4}).build(),
    "cartan": ObservableSpec("cartan", {"xi1": 1.2, "xi2": 0.8, "xi3": -0.3,
                                        "va": (0.1, 0.9, -0.4), "vb": (0.3, 1.7, 0.2),
                                        "wa": (1.0, 0.2, 0.5), "wb": (-0.6, 2.2, 0.1)}).build(),
}

psi = StateVector.random(2, rng)
for name, scheme in schemes.items():
    want = scheme.program.born_probabilities(psi.amps)
    runs = [run_scheme(scheme, psi, rng, mode="sampled", track_redundant=False)
            for _ in range(3000)]
    seen = Counter(r.label for r in runs)
    planned = expected_consumption(program_concat_spec(scheme.program))[1]
    print(f"{name}: expected ebits {planned:g}")
    for label in sorted(want):
        print(f"    label {label}: born {want[label]:.3f}  observed {seen[label] / len(runs):.3f}")

# Eigenstates come out with certainty.
cartan = schemes["cartan"]
for label, states in cartan.eigenstates().items():
    got = {run_scheme(cartan, StateVector(states[0]), rng, mode="sampled").label
           for _ in range(50)}
    print("cartan eigenstate", label, "->", got)
