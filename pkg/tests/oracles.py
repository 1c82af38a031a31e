"""Independent dense-matrix references used to check the library.

Nothing here imports the package under test, so agreement means two
separate derivations agree.
"""
import itertools
import math

import numpy as np
from scipy.linalg import expm

I = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SINGLE = {"I": I, "X": X, "Y": Y, "Z": Z}


def pauli(text: str) -> np.ndarray:
    """Character ``k`` acts on qubit ``k``; qubit 0 is the least significant bit."""
    out = np.eye(1, dtype=complex)
    for ch in text:
        out = np.kron(SINGLE[ch], out)
    return out


def rotation(text: str, theta: float) -> np.ndarray:
    return expm(-0.5j * theta * pauli(text))


def embed(u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Act with ``u`` (qubits[0] least significant) inside an ``n``-qubit register."""
    k = len(qubits)
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        sub = sum(((col >> q) & 1) << i for i, q in enumerate(qubits))
        base = col & ~sum(1 << q for q in qubits)
        for row_sub in range(1 << k):
            row = base | sum(((row_sub >> i) & 1) << q for i, q in enumerate(qubits))
            out[row, col] = u[row_sub, sub]
    return out


def cnot(control: int, target: int, n: int) -> np.ndarray:
    dim = 1 << n
    out = np.zeros((dim, dim))
    for i in range(dim):
        out[i ^ (((i >> control) & 1) << target), i] = 1
    return out.astype(complex)


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def random_unitary(dim: int, rng) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(n: int, rng) -> np.ndarray:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_density(n: int, rng) -> np.ndarray:
    g = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def all_pauli_texts(n: int):
    return ["".join(t) for t in itertools.product("IXZY", repeat=n)]


def twirl(rho: np.ndarray, n: int) -> np.ndarray:
    """Average of ``P rho P`` over all ``4^n`` Pauli strings."""
    return sum(pauli(t) @ rho @ pauli(t) for t in all_pauli_texts(n)) / 4 ** n


def schmidt_coefficients(amps: np.ndarray, v: int) -> np.ndarray:
    """Schmidt coefficients via eigenvalues of the reduced density matrix of qubits < v."""
    n = int(round(math.log2(len(amps))))
    m = amps.reshape(1 << (n - v), 1 << v)       # rows: high qubits, cols: low qubits
    rho = m.T @ m.conj()
    ev = np.clip(np.linalg.eigvalsh(rho)[::-1], 0, None)
    return np.sqrt(ev[ev > 1e-14])


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


def uniform_chi2_pvalue(counts) -> float:
    from scipy.stats import chisquare
    return float(chisquare(np.asarray(counts)).pvalue)


def chi2_pvalue(counts, probs) -> float:
    """Goodness of fit, merging cells with tiny expectation into one."""
    from scipy.stats import chisquare
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    total = counts.sum()
    exp = probs * total
    big = exp >= 5
    obs = list(counts[big]) + ([counts[~big].sum()] if (~big).any() else [])
    ex = list(exp[big]) + ([exp[~big].sum()] if (~big).any() else [])
    if len(obs) < 2:
        return 1.0
    ex = np.asarray(ex) * (sum(obs) / sum(ex))
    return float(chisquare(obs, ex).pvalue)


def ucr(gate, n: int) -> np.ndarray:
    """Uniformly controlled rotation as a sum over control patterns of projector times rotation."""
    axis = gate.axis.upper()
    u = np.zeros((1 << n, 1 << n), dtype=complex)
    for c, theta in enumerate(gate.angles):
        proj = np.eye(1 << n, dtype=complex)
        for i, q in enumerate(gate.controls):
            bit = (c >> i) & 1
            proj = embed(np.diag([1 - bit, bit]).astype(complex), (q,), n) @ proj
        u += embed(rotation(axis, theta), (gate.target,), n) @ proj
    return u
