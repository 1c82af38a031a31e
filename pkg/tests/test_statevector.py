import math

import numpy as np
import pytest

import oracles as O
from rotchain.pauli import PauliString, StabilizerGate, all_paulis, propagate_through_stabilizer
from rotchain.statevector import (BELL_STATES, StateVector, apply_pauli, apply_rotation,
                                  apply_unitary, bell_measure, fidelity, measure_z, schmidt,
                                  state_from_json, tensor)


def test_rejects_unnormalized():
    with pytest.raises(ValueError):
        StateVector([1, 1])


def test_rejects_bad_size():
    with pytest.raises(ValueError):
        StateVector([1, 0, 0])


class TestUnitary:
    def test_identity(self, rng):
        s = StateVector.random(2, rng)
        assert np.allclose(apply_unitary(s, np.eye(4), (0, 1)).amps, s.amps)

    def test_x_flips(self):
        s = apply_unitary(StateVector.zero(1), O.X, (0,))
        assert np.allclose(s.amps, [0, 1])

    def test_roundtrip(self, rng):
        s = StateVector.random(3, rng)
        u = O.random_unitary(4, rng)
        back = apply_unitary(apply_unitary(s, u, (2, 0)), u.conj().T, (2, 0))
        assert fidelity(back, s) > 1 - 1e-12

    def test_matches_embedding(self, rng):
        s = StateVector.random(3, rng)
        u = O.random_unitary(4, rng)
        out = apply_unitary(s, u, (2, 0))
        assert np.allclose(out.amps, O.embed(u, (2, 0), 3) @ s.amps)
        assert abs(out.norm() - 1) < 1e-10

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            apply_unitary(StateVector.zero(1), np.array([[1, 1], [0, 1]]), (0,))


class TestRotation:
    def test_zero_angle(self, rng):
        s = StateVector.random(2, rng)
        assert np.allclose(apply_rotation(s, PauliString.parse("XY"), 0.0).amps, s.amps)

    def test_ry_on_zero(self):
        t = 0.83
        s = apply_rotation(StateVector.zero(1), PauliString.parse("Y"), t)
        assert np.allclose(s.amps, [math.cos(t / 2), math.sin(t / 2)])

    def test_against_expm(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 4))
            text = "".join(rng.choice(list("IXZY"), size=n))
            theta = rng.uniform(-np.pi, np.pi)
            s = StateVector.random(n, rng)
            out = apply_rotation(s, PauliString.parse(text), theta)
            assert np.abs(out.amps - O.rotation(text, theta) @ s.amps).max() < 1e-10

    def test_quarter_turn_is_the_stabilizer(self):
        """R_Y(pi/2) conjugates Paulis exactly as the matching stabilizer gate does."""
        g = StabilizerGate("ry_half", (0,), 1)
        r = O.rotation("Y", np.pi / 2)
        for p in all_paulis(1):
            q = propagate_through_stabilizer(g, p)
            assert np.allclose((1j ** q.phase) * q.unsigned().matrix(),
                               r @ p.matrix() @ r.conj().T)


class TestMeasure:
    def test_deterministic(self, rng):
        bit, post = measure_z(StateVector.zero(1), 0, rng)
        assert bit == 0 and np.allclose(post.amps, [1, 0])

    def test_born_statistics(self, rng):
        plus = StateVector([1 / math.sqrt(2)] * 2)
        trials = 100_000
        ones = sum(measure_z(plus, 0, rng)[0] for _ in range(trials))
        sigma = math.sqrt(trials * 0.25)
        assert abs(ones - trials / 2) < 3 * sigma

    def test_bell_correlation(self, rng):
        for _ in range(20):
            bit, post = measure_z(StateVector(BELL_STATES[0]), 0, rng)
            assert np.allclose(np.abs(post.amps), [1, 0, 0, 0] if bit == 0 else [0, 0, 0, 1])

    def test_remove_drops_qubit(self, rng):
        s = StateVector.random(3, rng, labels=("a", "b", "c"))
        _, post = measure_z(s, "b", rng, remove=True)
        assert post.labels == ("a", "c") and abs(post.norm() - 1) < 1e-10


class TestBellMeasure:
    def test_phi2_certain(self, rng):
        s = tensor(StateVector(BELL_STATES[2], ("p", "q")), StateVector.zero(1, ("r",)))
        for _ in range(10):
            label, post = bell_measure(s, ("p", "q"), rng)
            assert label == 2 and post.labels == ("r",)

    def test_product_input(self, rng):
        counts = np.zeros(4, int)
        for _ in range(4000):
            counts[bell_measure(StateVector.zero(2), (0, 1), rng)[0]] += 1
        assert counts[1] == counts[3] == 0
        assert O.uniform_chi2_pvalue(counts[[0, 2]]) > 1e-3

    def test_teleport_use_uniform(self, rng):
        """Half of a fresh Bell pair against an arbitrary qubit: all labels equally likely."""
        psi = StateVector.random(1, rng, labels=("s",))
        pair = StateVector(BELL_STATES[0], ("e1", "e2"))
        s = tensor(psi, pair)
        counts = np.zeros(4, int)
        for _ in range(100_000 // 10):
            counts[bell_measure(s, ("s", "e1"), rng)[0]] += 1
        assert O.uniform_chi2_pvalue(counts) > 1e-3

    def test_remainder_is_distorted_input(self, rng):
        psi = StateVector.random(1, rng, labels=("s",))
        s = tensor(psi, StateVector(BELL_STATES[0], ("e1", "e2")))
        for _ in range(20):
            label, post = bell_measure(s, ("s", "e1"), rng)
            expected = apply_pauli(StateVector(psi.amps), PauliString.from_axes([label]))
            assert fidelity(StateVector(post.amps), expected) > 1 - 1e-10


class TestSchmidt:
    def test_product(self):
        f = schmidt(StateVector.zero(2), 1)
        assert f.rank == 1 and np.allclose(f.coeffs, [1])

    def test_phi0(self):
        f = schmidt(StateVector(BELL_STATES[0]), 1)
        assert np.allclose(f.coeffs, [1 / math.sqrt(2)] * 2)

    @pytest.mark.parametrize("v", [1, 2, 3, 4])
    def test_random_reconstruction(self, v, rng):
        amps = O.random_state(5, rng)
        f = schmidt(StateVector(amps), v)
        assert O.fidelity(f.state(), amps) > 1 - 1e-10
        assert np.allclose(np.sort(f.coeffs), np.sort(O.schmidt_coefficients(amps, v)),
                           atol=1e-10)

    def test_qubits_needed(self, rng):
        amps = O.random_state(4, rng)
        assert schmidt(StateVector(amps), 2).qubits_needed == 2


class TestJson:
    def test_pairs_roundtrip(self, rng):
        s = StateVector.random(3, rng)
        assert np.allclose(state_from_json(s.to_json()).amps, s.amps)

    def test_real_list(self):
        assert np.allclose(state_from_json("[0.6, 0.8]").amps, [0.6, 0.8])

    def test_schmidt_form(self, rng):
        s = StateVector.random(3, rng)
        f = schmidt(s, 1)
        pairs = lambda m: [[[z.real, z.imag] for z in row] for row in m]
        data = {"schmidt": {"coeffs": f.coeffs.tolist(), "a": pairs(f.basis_a),
                            "b": pairs(f.basis_b), "v": 1}}
        assert np.allclose(state_from_json(data).amps, s.amps)
