import itertools

import numpy as np
import pytest

import oracles as O
from rotchain.pauli import (PauliString, StabilizerGate, all_paulis, bell_label_of, commutes,
                            compose_bell_labels, equal_up_to_phase, multiply,
                            propagate_backward, propagate_through_rotation,
                            propagate_through_stabilizer, random_pauli, rotation_matrix)

P = PauliString.parse


def scaled(p: PauliString) -> np.ndarray:
    return (1j ** p.phase) * O.pauli("".join("IXZY"[c] for c in p.axes))


class TestConstruction:
    def test_parse_roundtrip(self):
        for text in ["X", "YZ", "IXZY", "-iZZ", "+iXI"]:
            p = P(text)
            assert P(str(p)) == p

    def test_axes_codes(self):
        assert P("IXZY").axes == (0, 1, 2, 3)

    def test_little_endian_matrix(self):
        assert np.allclose(P("XI").matrix(), np.kron(O.I, O.X))

    @pytest.mark.parametrize("bad", ["", "Q", "XA", "--X"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            P(bad)

    def test_mask_overflow(self):
        with pytest.raises(ValueError):
            PauliString(1, x=2)

    def test_all_paulis_count(self):
        assert len(list(all_paulis(2))) == 16


class TestCommutes:
    def test_examples(self):
        assert commutes(P("X"), P("X"))
        assert not commutes(P("X"), P("Z"))
        assert commutes(P("XX"), P("ZZ"))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_against_dense_commutator(self, n):
        texts = O.all_pauli_texts(n)
        for a, b in itertools.product(texts, texts):
            ma, mb = O.pauli(a), O.pauli(b)
            dense = np.allclose(ma @ mb, mb @ ma)
            assert commutes(P(a), P(b)) == dense

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            commutes(P("X"), P("XX"))


class TestMultiply:
    def test_identity(self):
        p = P("-iYZ")
        assert multiply(PauliString.identity(2), p) == p

    def test_x_times_z(self):
        assert multiply(P("X"), P("Z")) == P("-iY")

    def test_two_qubit(self):
        assert multiply(P("XZ"), P("ZZ")) == P("-iYI")

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_phase_exact_and_associative(self, n, rng):
        for _ in range(200):
            a, b, c = (PauliString(n, *(int(v) for v in rng.integers(0, 1 << n, 2)),
                                   int(rng.integers(4))) for _ in range(3))
            assert np.allclose(scaled(multiply(a, b)), scaled(a) @ scaled(b))
            assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))

    def test_equal_up_to_phase(self):
        assert equal_up_to_phase(P("-iXY"), P("XY"))
        assert not equal_up_to_phase(P("XY"), P("YX"))


class TestPropagation:
    GATES = [StabilizerGate("cnot", (0, 1)), StabilizerGate("cnot", (1, 0)),
             StabilizerGate("h", (0,)), StabilizerGate("s", (1,)),
             StabilizerGate("ry_half", (0,), 1), StabilizerGate("ry_half", (1,), -1)]

    def test_identity_is_fixed(self):
        for g in self.GATES:
            assert propagate_through_stabilizer(g, PauliString.identity(2)).is_identity()

    def test_cnot_x_control(self):
        out = propagate_through_stabilizer(StabilizerGate("cnot", (0, 1)), P("XI"))
        assert out == P("XX")

    def test_hadamard_z(self):
        assert propagate_through_stabilizer(StabilizerGate("h", (0,)), P("Z")) == P("X")

    @pytest.mark.parametrize("g", GATES, ids=lambda g: f"{g.kind}{g.qubits}{g.sign}")
    def test_conjugation_oracle_and_roundtrip(self, g):
        u = O.embed(g.local_matrix(), g.qubits, 2)
        for p in all_paulis(2):
            q = propagate_through_stabilizer(g, p)
            assert np.allclose(scaled(q), u @ scaled(p) @ u.conj().T)
            assert propagate_backward(g, q) == p

    def test_through_rotation_matches_dense(self, rng):
        for _ in range(100):
            axis = random_pauli(2, rng)
            if axis.is_identity():
                continue
            k = int(rng.integers(-3, 4))
            theta = k * np.pi / 2
            p = random_pauli(2, rng)
            r = rotation_matrix(axis.matrix(), theta)
            out = propagate_through_rotation(p, axis, theta)
            assert np.allclose(scaled(out), r @ scaled(p) @ r.conj().T)

    def test_through_rotation_rejects_non_clifford(self):
        with pytest.raises(ValueError):
            propagate_through_rotation(P("X"), P("Z"), 0.3)


class TestBellLabels:
    def test_examples(self):
        assert all(compose_bell_labels(0, b) == b for b in range(4))
        assert compose_bell_labels(1, 2) == 3
        assert compose_bell_labels(3, 3) == 0

    def test_full_table_from_circuit(self, rng):
        """Simulate the one-ebit Bell measurement and tabulate how local labels combine."""
        from rotchain.protocols import bell_scheme, local_bell_outcomes, run_scheme
        from rotchain.statevector import BELL_STATES, StateVector

        sch = bell_scheme()
        table = {}
        for k in range(4):
            for _ in range(60):
                run = run_scheme(sch, StateVector(BELL_STATES[k]), rng)
                a, b = local_bell_outcomes(*run.transcripts)
                table.setdefault((a, b), set()).add(run.label)
        assert len(table) == 16
        for (a, b), labels in table.items():
            assert labels == {compose_bell_labels(a, b)}
        # the (1, 3) and (3, 3) cells are where XOR and addition mod 4 disagree
        assert table[(1, 3)] == {2} and (1 + 3) % 4 == 0
        assert table[(3, 3)] == {0} and (3 + 3) % 4 == 2

    def test_range(self):
        with pytest.raises(ValueError):
            compose_bell_labels(4, 0)

    def test_label_of_pauli(self):
        assert [bell_label_of(P(c)) for c in "IXZY"] == [0, 1, 2, 3]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_twirl_scrambles(n, rng):
    rho = O.random_density(n, rng)
    out = sum(scaled(p) @ rho @ scaled(p).conj().T for p in all_paulis(n)) / 4 ** n
    assert np.allclose(out, np.eye(1 << n) / 2 ** n, atol=1e-12)
