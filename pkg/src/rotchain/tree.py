"""Concatenated rotation chains and their entanglement bookkeeping.

Every exit point of a chain is followed by a fresh chain for the next
rotation. Only one of those is on the real path; the rest are covered by
whichever party could have been there, acting alone on junk. A chain where
both parties act is called ``c``-type, one driven only by the party that
exited into it (the new initiator) is ``a``-type, and one where only the
remote party acts is ``b``-type.

Per chain, with Alice's exit at channel ``2q`` and Bob's at ``2p-1``:

======  ==================  =========================
type    channels            children
======  ==================  =========================
c       max(2q, 2p-1)       1 c, 1 a, q+p-2 b
a       2q                  1 a, q b
b       2p-1                1 a, p-1 b
======  ==================  =========================
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .chain import DEFAULT_CAP, ChainProgram
from .pauli import PauliString, random_pauli
from .statevector import StateVector

Z99 = 2.5758293035489004


@dataclass(frozen=True)
class ConsumptionConstants:
    A: float = (3 + 2 * math.sqrt(2)) / 2
    B: float = (3 - 2 * math.sqrt(2)) / 2
    phi: float = 1 + math.sqrt(2)
    C: float = (10 + 7 * math.sqrt(2)) / 4


CONSTANTS = ConsumptionConstants()


# -- closed forms --------------------------------------------------------

@lru_cache(maxsize=None)
def _abc(n: int) -> tuple[int, int, int]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 4, 3, 5
    a, b, c = _abc(n - 1)
    return 4 + a + 2 * b, 3 + a + b, 5 + c + a + 2 * b


def closed_form_a(n: int) -> int:
    """Mean channels of an n-level tree rooted at an initiator-only chain."""
    return _abc(n)[0]


def closed_form_b(n: int) -> int:
    return _abc(n)[1]


def closed_form_c(n: int) -> int:
    """Mean channels of ``n`` concatenated continuous-angle chains."""
    return _abc(n)[2]


def recurrence_r(n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    r = [0, 10, 34]
    while len(r) < n:
        r.append(3 * r[-1] - r[-2] - r[-3])
    return r[n - 1]


def closed_form_r(n: int) -> float:
    """Redundant channels added at level ``n``, in closed form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = CONSTANTS
    return k.A * k.phi**n + k.B * (-1 / k.phi) ** n - 7


def asymptotic_c(n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return CONSTANTS.C * CONSTANTS.phi**n


def binary_e(depth: int) -> float:
    """Mean ebits to verify a two-qubit state whose angle is binary at ``depth``.

    The square-root-of-two factors cancel for integer depths, so the value is
    a dyadic rational and is evaluated exactly.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    d = depth
    if d % 2:
        tail = -7 * Fraction(2) ** ((1 - d) // 2)
    else:
        tail = -10 * Fraction(2) ** (-(d // 2))
    return float(6 + Fraction(2) ** (2 - d) + tail)


def initial_channels(n: int, depth: int) -> int:
    """Channels that must be pre-shared for ``n`` binary chains of the given depth."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if depth < 2:
        if depth == 1:
            return 0
        raise ValueError("depth must be >= 1")
    m = depth - 1
    if m == 1:
        return n
    return m * (m**n - 1) // (m - 1)


def initial_channels_by_enumeration(n: int, depth: int) -> int:
    """Walk the full tree of possible chains and count every channel slot."""
    m = depth - 1
    if m <= 0:
        return 0
    level = [()]
    total = 0
    for _ in range(n):
        total += m * len(level)
        level = [pos + (k,) for pos in level for k in range(1, m + 1)]
    return total


# -- per-chain outcome patterns -------------------------------------------

@dataclass(frozen=True)
class Pattern:
    prob: float
    channels: int
    c: int
    a: int
    b: int


def _binary_exits(m_max: int, first: int):
    """(probability, exit channel or None, sent channels) for one party."""
    out = []
    p = 1.0
    ch = first
    sends = 0 if first == 1 else 1  # the initiator sends channel 1 before receiving
    while ch <= m_max:
        if ch == m_max:
            out.append((p, ch, sends))
            return out
        out.append((p / 2, ch, sends))
        p /= 2
        sends += 1
        ch += 2
    # sent the last channel and has no exit left
    out.append((p, None, sends))
    return out


@lru_cache(maxsize=None)
def binary_patterns(depth: int) -> dict[str, tuple[Pattern, ...]]:
    """Exact outcome table of one binary chain for each participation type."""
    m_max = depth - 1
    if m_max < 1:
        raise ValueError("binary chains need depth >= 2")
    alice = _binary_exits(m_max, 2)
    bob = _binary_exits(m_max, 1)

    def last(exit_ch, sends, first_send):
        return exit_ch if exit_ch is not None else first_send + 2 * (sends - 1)

    pats: dict[str, list] = {"a": [], "b": [], "c": []}
    for pa, ea, sa in alice:
        la = last(ea, sa, 1)
        pats["a"].append(Pattern(pa, la, 0, int(ea is not None), sa))
    for pb, eb, sb in bob:
        lb = last(eb, sb, 2)
        pats["b"].append(Pattern(pb, lb, 0, int(eb is not None), sb))
    for pa, ea, sa in alice:
        for pb, eb, sb in bob:
            la = last(ea, sa, 1)
            lb = last(eb, sb, 2)
            exits = int(ea is not None) + int(eb is not None)
            pats["c"].append(Pattern(pa * pb, max(la, lb), 1, exits - 1, sa + sb - 1))
    return {k: tuple(v) for k, v in pats.items()}


def _continuous_means() -> dict[str, tuple[float, float, float, float]]:
    # (channels, c, a, b) expectations with q, p ~ Geometric(1/2)
    return {"c": (5.0, 1, 1, 2.0), "a": (4.0, 0, 1, 2.0), "b": (3.0, 0, 1, 1.0)}


# -- specifications --------------------------------------------------------

@dataclass(frozen=True)
class ConcatSpec:
    """Chains applied in order, then optionally independent lanes.

    ``root`` is the participation of the first chain: ``"c"`` normally, or
    ``"b"`` when the initiator might skip the chain (classically controlled
    rotation) so only the remote side is certain to act. ``fixed_ebits``
    covers localization.
    """

    chains: tuple
    lanes: tuple = ()
    root: str = "c"
    fixed_ebits: int = 0

    def __post_init__(self):
        object.__setattr__(self, "chains", tuple(self.chains))
        object.__setattr__(self, "lanes", tuple(tuple(l) for l in self.lanes))
        if not self.chains and not self.lanes and not self.fixed_ebits:
            raise ValueError("a concatenation needs at least one chain")
        if self.root not in ("a", "b", "c"):
            raise ValueError("root participation must be a, b or c")
        for ch in self.chains + tuple(c for l in self.lanes for c in l):
            if not isinstance(ch, ChainProgram):
                raise TypeError("chains must be ChainProgram instances")

    @classmethod
    def uniform(cls, n: int, width: int = 1, depth: int | None = None, fixed_ebits: int = 0,
                theta: float = 0.7) -> "ConcatSpec":
        if n < 1:
            raise ValueError("n must be >= 1")
        axis = PauliString.from_axes([2] * width)
        if depth is not None:
            theta = np.pi / 2**depth
        return cls(tuple(ChainProgram(axis, theta, depth) for _ in range(n)),
                   fixed_ebits=fixed_ebits)

    @property
    def levels(self) -> int:
        return len(self.chains) + max((len(l) for l in self.lanes), default=0)


@dataclass
class ConsumptionStats:
    trials: int
    mean_channels: float
    mean_ebits: float
    variance: float
    ci99: float
    counts: dict = field(default_factory=dict)
    exhausted: int = 0

    def to_dict(self) -> dict:
        return {"trials": self.trials, "mean_channels": self.mean_channels,
                "mean_ebits": self.mean_ebits, "variance": self.variance, "ci99": self.ci99,
                "counts": dict(self.counts), "exhausted": self.exhausted}


# -- exact expectations -----------------------------------------------------

def expected_consumption(spec: ConcatSpec) -> tuple[float, float]:
    """Exact mean (channels, ebits) by linearity over the per-chain tables."""

    def walk(chains, counts):
        ch_tot = eb_tot = 0.0
        for prog in chains:
            if prog.is_stabilizer():
                continue
            nxt = {"c": 0.0, "a": 0.0, "b": 0.0}
            for t, n_t in counts.items():
                if not n_t:
                    continue
                if prog.depth is None:
                    cost, kc, ka, kb = _continuous_means()[t]
                else:
                    pats = binary_patterns(prog.depth)[t]
                    cost = sum(p.prob * p.channels for p in pats)
                    kc = sum(p.prob * p.c for p in pats)
                    ka = sum(p.prob * p.a for p in pats)
                    kb = sum(p.prob * p.b for p in pats)
                ch_tot += n_t * cost
                eb_tot += n_t * cost * prog.width
                nxt["c"] += n_t * kc
                nxt["a"] += n_t * ka
                nxt["b"] += n_t * kb
            counts = nxt
        return ch_tot, eb_tot, counts

    ch, eb, counts = walk(spec.chains, {"c": 0.0, "a": 0.0, "b": 0.0, spec.root: 1.0})
    for lane in spec.lanes:
        lch, leb, _ = walk(lane, dict(counts))
        ch += lch
        eb += leb
    return ch, eb + spec.fixed_ebits


def exact_binary_expectation(n: int, depth: int) -> float:
    """Mean channels of ``n`` concatenated binary chains of one depth."""
    return expected_consumption(ConcatSpec.uniform(n, depth=depth))[0]


# -- Monte Carlo -------------------------------------------------------------

def _nb_total(rng, n: np.ndarray) -> np.ndarray:
    """Sum of ``n`` independent Geometric(1/2) variables on {1, 2, ...}."""
    safe = np.maximum(n, 1)
    extra = rng.negative_binomial(safe, 0.5)
    return np.where(n > 0, n + extra, 0)


def _level_continuous(rng, counts):
    na, nb, nc = counts["a"], counts["b"], counts["c"]
    if np.any(nc > 1):
        raise AssertionError("more than one chain with both parties at a level")
    sq = _nb_total(rng, na)
    sp = _nb_total(rng, nb)
    q = rng.geometric(0.5, size=nc.shape)
    p = rng.geometric(0.5, size=nc.shape)
    cost_c = np.where(nc > 0, np.maximum(2 * q, 2 * p - 1), 0)
    channels = 2 * sq + (2 * sp - nb) + cost_c
    nxt = {"c": nc.copy(), "a": na + nb + nc, "b": sq + (sp - nb) + nc * (q + p - 2)}
    return channels, nxt


def _level_binary(rng, counts, depth):
    pats = binary_patterns(depth)
    channels = np.zeros_like(counts["a"])
    nxt = {k: np.zeros_like(counts["a"]) for k in "abc"}
    for t in "abc":
        n_t = counts[t]
        if not np.any(n_t):
            continue
        table = pats[t]
        probs = np.array([p.prob for p in table])
        draw = rng.multinomial(n_t, probs / probs.sum())
        for col, pat in enumerate(table):
            k = draw[:, col]
            channels += k * pat.channels
            nxt["c"] += k * pat.c
            nxt["a"] += k * pat.a
            nxt["b"] += k * pat.b
    return channels, nxt


def _sample_chains(rng, chains, counts):
    total_ch = np.zeros_like(counts["a"])
    total_eb = np.zeros_like(counts["a"])
    seen = {k: np.zeros_like(counts["a"]) for k in "abc"}
    for prog in chains:
        if prog.is_stabilizer():
            continue
        for k in "abc":
            seen[k] += counts[k]
        if prog.depth is None:
            ch, counts = _level_continuous(rng, counts)
        else:
            ch, counts = _level_binary(rng, counts, prog.depth)
        total_ch += ch
        total_eb += ch * prog.width
    return total_ch, total_eb, counts, seen


def _stats(trials, ch, eb, seen) -> ConsumptionStats:
    eb = eb.astype(float)
    var = float(eb.var(ddof=1)) if trials > 1 else 0.0
    return ConsumptionStats(trials, float(ch.mean()), float(eb.mean()), var,
                            Z99 * math.sqrt(var / trials),
                            {k: float(v.mean()) for k, v in seen.items()})


def monte_carlo_consumption(spec: ConcatSpec, trials: int, rng: np.random.Generator,
                            block: int = 200_000) -> ConsumptionStats:
    """Sample whole concatenation trees, one aggregate draw per level and type.

    Node counts of each participation type are carried level by level; the
    sums of per-chain geometric variables are drawn as negative binomials
    (continuous) or multinomials over the exact outcome table (binary).
    Trials are processed in blocks, each with its own child generator.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    chs, ebs = [], []
    seen_all = {k: [] for k in "abc"}
    done = 0
    for sub in rng.spawn(-(-trials // block)):
        t = min(block, trials - done)
        done += t
        counts = {k: np.zeros(t, dtype=np.int64) for k in "abc"}
        counts[spec.root][:] = 1
        ch, eb, counts, seen = _sample_chains(sub, spec.chains, counts)
        for lane in spec.lanes:
            lch, leb, _, lseen = _sample_chains(sub, lane, {k: v.copy() for k, v in counts.items()})
            ch = ch + lch
            eb = eb + leb
            for k in "abc":
                seen[k] = seen[k] + lseen[k]
        chs.append(ch)
        ebs.append(eb + spec.fixed_ebits)
        for k in "abc":
            seen_all[k].append(seen[k])
    return _stats(trials, np.concatenate(chs), np.concatenate(ebs),
                  {k: np.concatenate(v) for k, v in seen_all.items()})


def mixed_width_consumption(spec: ConcatSpec, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo mean ebits, each chain weighted by its qubit width."""
    return monte_carlo_consumption(spec, trials, rng).mean_ebits


# -- full simulation ---------------------------------------------------------

def spec_program(spec: ConcatSpec):
    """The rotation program that carries out ``spec`` on ``max width`` qubits."""
    from .program import Parallel, Rotation, RotationProgram

    if spec.root != "c" or spec.lanes:
        raise ValueError("only plain concatenations map to a standalone program")
    n = spec.chains[0].width
    if any(ch.width != n for ch in spec.chains):
        raise ValueError("a standalone program needs chains of one width")
    items = []
    for ch in spec.chains:
        axes = list(ch.axis.axes) + [0] * (n - ch.width)
        items.append(Rotation(PauliString.from_axes(axes), ch.theta, ch.depth))
    return RotationProgram(n, tuple(range(n)), (), tuple(items), tuple(range(n)))


def run_concatenated(state: StateVector, spec: ConcatSpec, rng: np.random.Generator,
                     mode: str = "exact", cap: int = DEFAULT_CAP):
    """Run every chain of ``spec`` with both parties and the full redundant tree.

    The initiator starts with ``state`` carrying a uniformly random distortion
    known only to the other party. Returns ``(holder, transcripts, stats,
    execution)`` where ``stats`` describes this single trial.
    """
    from .engine import execute, reconcile_frame

    prog = spec_program(spec)
    incoming = random_pauli(prog.n, rng)
    ex = execute(prog, state, rng, mode=mode, cap=cap, incoming=incoming)
    holder, _ = reconcile_frame(ex.transcripts["A"], ex.transcripts["B"], prog)
    channels = len(ex.registry.consumed())
    stats = ConsumptionStats(1, float(channels), float(ex.ebits), 0.0, 0.0,
                             node_types(ex), int(ex.exhausted))
    return holder, ex.transcripts, stats, ex


def node_types(ex) -> dict:
    """Count instantiated chains by which parties left records in them."""
    out = {"a": 0, "b": 0, "c": 0}
    for node in ex.node_width:
        parts = {r["party"] for t in ex.transcripts.values() for r in t.at(node)}
        init = _initiator_of(ex, node)
        if len(parts) == 2:
            out["c"] += 1
        elif parts == {init}:
            out["a"] += 1
        else:
            out["b"] += 1
    return out


def _initiator_of(ex, node):
    for t in ex.transcripts.values():
        for r in t.at(node):
            if r["action"] == "send" and r["step"] == 1:
                return r["party"]
    return None
