import math

import numpy as np
import pytest

import oracles as O
from rotchain.program import MeasureZ, Rotation
from rotchain.statevector import StateVector, schmidt
from rotchain.synthesis import (CartanParams, UCRGate, angles_to_coefficients, binarize, binary_depth,
                                binary_error_bound, binary_round, coefficient_tree_circuit,
                                build_schmidt_prep, cartan_program, entangled_pair_basis_program,
                                entangled_pair_basis_states, entangled_pair_prep,
                                exponent_angles, coefficient_state, coefficients_to_angles,
                                multi_qubit_verification_program, program_concat_spec,
                                rotation_error_bound, rotations_unitary, su2d_program,
                                su2d_rotation_count, su2d_skeleton_size, twisted_basis_program,
                                twisted_basis_states, two_qubit_verification_program,
                                ucr_to_rotations)
from rotchain.tree import closed_form_c, expected_consumption


ucr_oracle = O.ucr


def random_ucr(k, n, rng, axis="y"):
    qubits = rng.permutation(n)[: k + 1]
    return UCRGate(tuple(int(q) for q in qubits[1:]), int(qubits[0]), axis,
                   tuple(rng.uniform(-np.pi, np.pi, 1 << k)))


class TestUCR:
    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    @pytest.mark.parametrize("axis", ["y", "z"])
    def test_rotations_reproduce_gate(self, k, axis, rng):
        n = k + 1
        for _ in range(100):
            g = random_ucr(k, n, rng, axis)
            rots = ucr_to_rotations(g, n)
            assert len(rots) == 1 << k
            want = ucr_oracle(g, n)
            assert np.abs(rotations_unitary(rots, n) - want).max() < 1e-10
            assert np.abs(g.matrix(n) - want).max() < 1e-10

    def test_rotations_commute(self, rng):
        g = random_ucr(2, 3, rng)
        mats = [O.rotation("".join("IXZY"[c] for c in p.axes), t)
                for p, t in ucr_to_rotations(g, 3)]
        for a in mats:
            for b in mats:
                assert np.allclose(a @ b, b @ a)

    def test_single_nonzero_pattern(self):
        g = UCRGate((1, 0), 2, "y", (np.pi, 0, 0, 0))
        xi = exponent_angles(ucr_to_rotations(g, 3))
        assert xi == pytest.approx([-np.pi / 8] * 4)

    def test_validation(self):
        with pytest.raises(ValueError):
            UCRGate((0,), 0, "y", (0.1, 0.2))
        with pytest.raises(ValueError):
            UCRGate((1,), 0, "x", (0.1, 0.2))
        with pytest.raises(ValueError):
            UCRGate((1,), 0, "y", (0.1,))


class TestCoefficientTree:
    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_roundtrip(self, d, rng):
        for _ in range(20):
            lam = np.abs(rng.normal(size=1 << d))
            lam /= np.linalg.norm(lam)
            angles = coefficients_to_angles(lam)
            assert angles.size == (1 << d) - 1
            assert np.allclose(angles_to_coefficients(angles), lam, atol=1e-12)

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_cascade_prepares_state(self, d, rng):
        lam = np.abs(rng.normal(size=1 << d))
        lam /= np.linalg.norm(lam)
        u = np.eye(1 << d, dtype=complex)
        for g in coefficient_tree_circuit(coefficients_to_angles(lam), d):
            u = ucr_oracle(g, d) @ u
        assert np.allclose(u[:, 0], coefficient_state(lam, d), atol=1e-12)

    def test_aliases(self):
        from rotchain import synthesis
        assert synthesis.lambda_to_angles is coefficients_to_angles
        assert synthesis.build_lambda_circuit is coefficient_tree_circuit

    def test_zero_subtree(self):
        lam = np.array([1, 0, 0, 0], dtype=float)
        assert np.allclose(coefficients_to_angles(lam), 0)

    def test_rejects(self):
        with pytest.raises(ValueError):
            coefficients_to_angles([0.6, -0.8])
        with pytest.raises(ValueError):
            coefficients_to_angles([0.5, 0.5, 0.5])


class TestSchmidtPrep:
    @pytest.mark.parametrize("v,w", [(1, 1), (1, 2), (2, 2), (2, 3), (3, 1)])
    def test_prepares_target(self, v, w, rng):
        amps = O.random_state(v + w, rng)
        prep = build_schmidt_prep(schmidt(StateVector(amps), v))
        assert O.fidelity(prep.state(), amps) > 1 - 1e-10
        assert prep.d == math.ceil(math.log2(min(1 << v, 1 << w)))

    def test_product_needs_no_cascade(self, rng):
        amps = np.kron(O.random_state(1, rng), O.random_state(2, rng))
        prep = build_schmidt_prep(schmidt(StateVector(amps), 2))
        assert prep.d == 0 and not prep.cascade
        assert O.fidelity(prep.state(), amps) > 1 - 1e-10


class TestVerification:
    @pytest.mark.parametrize("v,w", [(1, 1), (1, 2), (2, 1), (2, 2)])
    def test_target_says_yes(self, v, w, rng):
        amps = O.random_state(v + w, rng)
        prog = multi_qubit_verification_program(amps, (v, w))
        assert prog.born_probabilities(amps)[0] == pytest.approx(1, abs=1e-10)

    def test_orthogonal_says_no(self, rng):
        amps = O.random_state(4, rng)
        other = O.random_state(4, rng)
        other -= np.vdot(amps, other) * amps
        other /= np.linalg.norm(other)
        prog = multi_qubit_verification_program(amps, (2, 2))
        assert prog.born_probabilities(other).get(0, 0) < 1e-10

    def test_yes_probability_is_overlap(self, rng):
        amps, psi = O.random_state(3, rng), O.random_state(3, rng)
        prog = multi_qubit_verification_program(amps, (1, 2))
        assert prog.born_probabilities(psi)[0] == pytest.approx(O.fidelity(amps, psi))

    @pytest.mark.parametrize("d", [1, 2])
    def test_chain_count_and_cost(self, d, rng):
        amps = O.random_state(2 * d, rng)
        prog = multi_qubit_verification_program(amps, (d, d))
        assert len(prog.chain_rotations()) == (1 << d) - 1
        cost = expected_consumption(program_concat_spec(prog))[1]
        assert cost == pytest.approx(d * closed_form_c((1 << d) - 1) + d)

    def test_two_qubit_eigenbasis(self, rng):
        amps = O.random_state(2, rng)
        prog = two_qubit_verification_program(amps)
        eig = prog.eigenstates()
        assert O.fidelity(eig[0][0], amps) == pytest.approx(1)
        assert sorted(eig) == [0, 1, 2, 3]

    def test_bipartition_checked(self, rng):
        with pytest.raises(ValueError):
            multi_qubit_verification_program(O.random_state(3, rng), (2, 2))
        with pytest.raises(ValueError):
            multi_qubit_verification_program(O.random_state(6, rng), (5, 1))


def assert_eigenbasis(prog, rows):
    for k, row in enumerate(rows):
        assert prog.born_probabilities(row)[k] == pytest.approx(1, abs=1e-10)


class TestTwoQubitObservables:
    def test_twisted(self, rng):
        for _ in range(5):
            theta, phi = rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi)
            rows = twisted_basis_states(theta, phi)
            assert np.allclose(rows @ rows.conj().T, np.eye(4))
            assert_eigenbasis(twisted_basis_program(theta, phi), rows)

    def test_twisted_cost(self):
        prog = twisted_basis_program(0.7, 0.3)
        assert expected_consumption(program_concat_spec(prog, True))[1] == 6
        assert expected_consumption(program_concat_spec(prog, False))[1] == 4

    def test_entangled_pair(self, rng):
        for _ in range(5):
            a = rng.uniform(0, np.pi, 2)
            f = rng.uniform(-np.pi, np.pi, 2)
            rows = entangled_pair_basis_states(a[0], f[0], a[1], f[1])
            assert np.allclose(rows @ rows.conj().T, np.eye(4))
            assert_eigenbasis(entangled_pair_basis_program(a[0], f[0], a[1], f[1]), rows)

    def test_entangled_pair_prep_columns(self, rng):
        a = rng.uniform(0, np.pi, 2)
        f = rng.uniform(-np.pi, np.pi, 2)
        u = np.eye(4, dtype=complex)
        for g in entangled_pair_prep(a[0], f[0], a[1], f[1]):
            u = (ucr_oracle(g, 2) if isinstance(g, UCRGate)
                 else O.embed(g.local_matrix(), g.qubits, 2)) @ u
        rows = entangled_pair_basis_states(a[0], f[0], a[1], f[1])
        # each prepared column is one of the basis states up to phase
        for col in u.T:
            assert max(O.fidelity(col, r) for r in rows) == pytest.approx(1)

    def test_entangled_pair_cost(self):
        prog = entangled_pair_basis_program(0.4, 0.5, 1.1, -0.3)
        assert expected_consumption(program_concat_spec(prog))[1] == pytest.approx(216)

    @pytest.mark.parametrize("split", [True, False])
    def test_cartan(self, split, rng):
        p = CartanParams.random(rng)
        u = p.unitary()
        assert np.allclose(u @ u.conj().T, np.eye(4))
        assert_eigenbasis(cartan_program(p, split), u.conj())

    def test_cartan_costs(self, rng):
        p = CartanParams.random(rng)
        assert expected_consumption(program_concat_spec(cartan_program(p)))[1] == 787
        unsplit = program_concat_spec(cartan_program(p, split=False))
        assert expected_consumption(unsplit)[1] == 4719

    def test_cartan_stabilizer_only(self):
        p = CartanParams(np.pi / 2, 0, 0)
        prog = cartan_program(p)
        assert not prog.chain_rotations()
        assert expected_consumption(program_concat_spec(prog)) == (0, 1)

    def test_cartan_ordering_enforced(self):
        with pytest.raises(ValueError):
            CartanParams(0.1, 0.2, 0.0)


class TestSU2d:
    def test_sizes(self):
        assert su2d_skeleton_size(2) == 6 and su2d_skeleton_size(3) == 14
        assert su2d_rotation_count(2) == 12
        assert all(su2d_rotation_count(d) == 4**d - 2**d for d in range(1, 6))

    @pytest.mark.parametrize("d", [2, 3])
    def test_program_matches_layers(self, d, rng):
        layers = []
        for i in range(su2d_skeleton_size(d)):
            tgt = i % d
            ctrl = tuple(q for q in range(d) if q != tgt)
            layers.append(UCRGate(ctrl, tgt, "z" if i % 2 == 0 else "y",
                                  tuple(rng.uniform(-np.pi, np.pi, 1 << (d - 1)))))
        prog = su2d_program(layers, d)
        u = np.eye(1 << d, dtype=complex)
        for g in layers:
            u = ucr_oracle(g, d) @ u
        assert np.allclose(prog.unitary(), u, atol=1e-10)
        assert len(prog.rotations()) == su2d_rotation_count(d)
        assert isinstance(prog.items[-1], MeasureZ)

    def test_alternation_required(self, rng):
        layers = [UCRGate((1,), 0, "y", (0.1, 0.2))] * su2d_skeleton_size(2)
        with pytest.raises(ValueError):
            su2d_program(layers, 2)


class TestBinaryApprox:
    def test_round(self):
        assert binary_round(0.4, 3) == pytest.approx(np.pi / 8)
        assert binary_round(3 * np.pi / 16, 3) == pytest.approx(np.pi / 4)
        assert binary_round(np.pi / 16, 3) == 0.0

    def test_depth(self):
        assert binary_depth(3 * np.pi / 8, 3) == 3
        assert binary_depth(np.pi / 4, 3) == 2
        assert binary_depth(0.01, 3) is None

    def test_bound(self):
        assert binary_error_bound(3) == pytest.approx(2 * math.sin(math.pi / 64), rel=1e-12)
        assert binary_error_bound(3) == pytest.approx(0.0982, abs=1e-4)
        for depth in range(1, 12):
            assert binary_error_bound(depth) == pytest.approx(
                rotation_error_bound(math.pi / 2 ** (depth + 1), 0)[0])

    def test_rotation_error_is_operator_norm(self, rng):
        for _ in range(20):
            t, s = rng.uniform(-np.pi, np.pi, 2)
            e, e2 = rotation_error_bound(t, s)
            diff = O.rotation("Z", t) - O.rotation("Z", s)
            assert e == pytest.approx(np.linalg.norm(diff, 2))
            assert e2 == 2 * e

    def test_rounding_within_bound(self, rng):
        for depth in range(1, 8):
            for t in rng.uniform(-np.pi, np.pi, 50):
                e, _ = rotation_error_bound(t, binary_round(t, depth))
                assert e <= binary_error_bound(depth) + 1e-12

    @pytest.mark.parametrize("depth", [2, 3, 5])
    def test_program_error_additive(self, depth, rng):
        p = CartanParams.random(rng)
        prog = cartan_program(p)
        approx = binarize(prog, depth)
        total = 0.0
        for r in prog.chain_rotations():
            total += rotation_error_bound(r.theta, binary_round(r.theta, depth))[0]
        assert np.linalg.norm(prog.unitary() - approx.unitary(), 2) <= total + 1e-10
        for _ in range(10):
            psi = O.random_state(2, rng)
            a, b = prog.born_probabilities(psi), approx.born_probabilities(psi)
            assert max(abs(a[k] - b.get(k, 0)) for k in a) <= 2 * total + 1e-10

    def test_binarized_chains_tagged(self, rng):
        prog = binarize(cartan_program(CartanParams.random(rng)), 4)
        for r in prog.chain_rotations():
            assert isinstance(r, Rotation) and r.depth is not None and r.depth <= 4
