import numpy as np
import pytest

import oracles as O
from rotchain.pauli import PauliString, all_paulis
from rotchain.statevector import StateVector, apply_pauli, fidelity
from rotchain.teleportation import (ChannelRegistry, ProtocolViolation, allocate,
                                    consumed_ebits, receive, teleport)


def fresh(width=1, sender="A"):
    reg = ChannelRegistry()
    cid = allocate(reg, width, 1, f"{sender}->{'B' if sender == 'A' else 'A'}")[0]
    return reg, reg.channels[cid]


class TestAllocation:
    def test_fresh_ids(self):
        reg = ChannelRegistry()
        ids = allocate(reg, 2, 3, "A->B")
        assert len(set(ids)) == 3

    def test_disjoint(self):
        reg = ChannelRegistry()
        assert not set(allocate(reg, 1, 2, "A->B")) & set(allocate(reg, 1, 2, "B->A"))

    def test_allocation_costs_nothing(self):
        reg = ChannelRegistry()
        allocate(reg, 2, 5, "A->B")
        assert consumed_ebits(reg) == 0

    def test_width_two_consumed(self, rng):
        reg, ch = fresh(2)
        teleport(StateVector.zero(2), (0, 1), ch, reg, rng)
        assert consumed_ebits(reg) == 2

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            allocate(ChannelRegistry(), 1, 1, "C->A")


class TestTeleport:
    def test_clean_outcome_keeps_state(self, rng):
        # sampled mode lets us read the branch directly from the outcome
        for _ in range(50):
            reg, ch = fresh()
            rec, out = teleport(StateVector.zero(1), (0,), ch, reg, rng, mode="sampled")
            expect = [1, 0] if rec.outcome.x == 0 else [0, 1]
            assert np.allclose(np.abs(out.amps), expect)

    @pytest.mark.parametrize("width", [1, 2])
    def test_exact_equals_distorted_input(self, width, rng):
        for _ in range(30):
            psi = StateVector.random(width + 1, rng)
            reg, ch = fresh(width)
            qubits = tuple(range(width))
            rec, out = teleport(psi, qubits, ch, reg, rng)
            assert set(out.labels) == set(psi.labels)
            out = out.reorder(psi.labels)
            expected = apply_pauli(psi, rec.outcome, qubits)
            assert fidelity(out, expected) > 1 - 1e-10

    def test_every_outcome_branch(self, rng):
        """Project by hand onto each Bell outcome and compare with sigma_a |psi>."""
        from rotchain.statevector import BELL_STATES
        psi = O.random_state(1, rng)
        # qubits: 0 = system, 1 = sender half, 2 = receiver half
        pair = np.zeros(8, dtype=complex)
        for s in range(2):
            for e in range(2):
                pair[s | (e << 1) | (e << 2)] += psi[s] / np.sqrt(2)
        for a, ptext in enumerate("IXZY"):
            bra = BELL_STATES[a].conj()
            rest = np.zeros(2, dtype=complex)
            for idx in range(8):
                s, e1, r = idx & 1, (idx >> 1) & 1, (idx >> 2) & 1
                rest[r] += bra[s | (e1 << 1)] * pair[idx]
            rest /= np.linalg.norm(rest)
            assert O.fidelity(rest, O.pauli(ptext) @ psi) > 1 - 1e-10

    def test_outcomes_uniform_two_qubits(self, rng):
        counts = np.zeros(16, int)
        psi = StateVector.random(2, rng)
        for _ in range(10_000):
            reg, ch = fresh(2)
            rec, _ = teleport(psi, (0, 1), ch, reg, rng)
            counts[rec.outcome.x | (rec.outcome.z << 2)] += 1
        assert O.uniform_chi2_pvalue(counts) > 1e-3

    def test_outcomes_do_not_depend_on_input(self, rng):
        table = []
        for psi in (StateVector.zero(1), StateVector([0, 1]), StateVector.random(1, rng)):
            counts = np.zeros(4, int)
            for _ in range(4000):
                reg, ch = fresh()
                rec, _ = teleport(psi, (0,), ch, reg, rng)
                counts[rec.outcome.x | (rec.outcome.z << 1)] += 1
            table.append(counts)
        from scipy.stats import chi2_contingency
        assert chi2_contingency(np.array(table)).pvalue > 1e-3

    def test_ledger_is_sum_of_widths(self, rng):
        reg = ChannelRegistry()
        widths = [1, 2, 1, 3]
        state = StateVector.random(3, rng)
        for w in widths:
            ch = reg.channels[allocate(reg, w, 1, "A->B")[0]]
            _, state = teleport(state, tuple(range(w)), ch, reg, rng, mode="sampled")
        assert consumed_ebits(reg) == sum(widths)


class TestDirection:
    def test_wrong_sender(self, rng):
        reg, ch = fresh(1, "A")
        with pytest.raises(ProtocolViolation):
            teleport(StateVector.zero(1), (0,), ch, reg, rng, sender="B")

    def test_no_reuse(self, rng):
        reg, ch = fresh()
        teleport(StateVector.zero(1), (0,), ch, reg, rng)
        with pytest.raises(ProtocolViolation):
            teleport(StateVector.zero(1), (0,), ch, reg, rng)

    def test_receiver_only(self):
        reg, ch = fresh(1, "A")
        with pytest.raises(ProtocolViolation):
            receive(reg, ch, "A")
        receive(reg, ch, "B")
        assert consumed_ebits(reg) == 1

    def test_width_mismatch(self, rng):
        reg, ch = fresh(2)
        with pytest.raises(ValueError):
            teleport(StateVector.zero(1), (0,), ch, reg, rng)


def test_phase_free_outcomes(rng):
    reg, ch = fresh(2)
    rec, _ = teleport(StateVector.random(2, rng), (0, 1), ch, reg, rng)
    assert rec.outcome.phase == 0
    assert rec.outcome in set(all_paulis(2))
    assert rec.to_dict()["outcome"] == rec.outcome.label()
    assert isinstance(rec.outcome, PauliString)
