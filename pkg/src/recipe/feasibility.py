"""Realizability of XDD sequences and the action probability array (APA).

An XDD sequence mu_1..mu_K can be produced by stateless per-hop
Add/Skip/Replace actions iff, for all 2 <= i <= K and 1 <= d <= i-1,

    q_{i-1}(d) >= q_i(d) + q_i(d+1).                                  (*)

All checks run in mu-space through the exact rearrangement

    mu_{i-1}(d) >= mu_i(d) (i-d)/i + mu_i(d+1) (d+1)/i,

which uses C(i-1,d)/C(i,d) = (i-d)/i and C(i-1,d)/C(i,d+1) = (d+1)/i and
therefore never materializes a C(236, d)-sized binomial.  The same
identities give the action probabilities

    p_A(i,d) = q_i(d+1)/q_{i-1}(d) = mu_i(d+1)/mu_{i-1}(d) * (d+1)/i
    p_S(i,d) = q_i(d)  /q_{i-1}(d) = mu_i(d)  /mu_{i-1}(d) * (i-d)/i
    p_R(i,d) = 1 - p_A - p_S

with the fixed hop-1 triple (0, 0, 1): the first switch always replaces.

`exact_induced_sequence` is the independent oracle for all of the above:
it enumerates every XOR-set a packet can carry, hop by hop, with its exact
probability under an APA, and checks the uniformity condition directly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfeasibleSequenceError,
    InternalConsistencyError,
    ProtocolError,
    RangeError,
    SequenceValidationError,
    UniformityError,
)
from .xdd import (
    Xdd,
    XddSequence,
    _atomic_write_text,
    binomial_log,
    mu_to_q,
    sequence_from_masses,
)

# A constraint is only counted as violated when its mu-space slack is more
# negative than this; search outputs sit exactly on facets and accumulate
# rounding of this order.
SLACK_TOL = 1e-12

UNIFORMITY_TOL = 1e-10

# Exhaustive enumeration walks all XOR-sets over [K]; beyond this the walk
# is pointless as an oracle.
ENUMERATION_LIMIT = 12


@dataclass(frozen=True)
class Violation:
    """One violated constraint, reported in q-space: lhs >= rhs failed."""

    i: int
    d: int
    lhs: float
    rhs: float


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.feasible != (len(self.violations) == 0):
            raise InternalConsistencyError("feasible flag disagrees with violations")


def _rhs_mu(mass_i: np.ndarray, i: int) -> np.ndarray:
    """mu-space right-hand side of (*) for d = 1..i-1 given mu_i."""
    d = np.arange(1, i)
    return mass_i[: i - 1] * (i - d) / i + mass_i[1:i] * (d + 1) / i


def check_feasible(seq: XddSequence, tol: float = SLACK_TOL) -> FeasibilityReport:
    """Check every constraint of (*); report violations in q-space."""
    if not isinstance(seq, XddSequence):
        raise SequenceValidationError("check_feasible expects an XddSequence")
    violations = []
    for i in range(2, seq.K + 1):
        lhs = seq.xdds[i - 2].mass
        rhs = _rhs_mu(seq.xdds[i - 1].mass, i)
        bad = np.nonzero(lhs - rhs < -tol)[0]
        for idx in bad:
            d = int(idx) + 1
            c = math.comb(i - 1, d)
            if c <= 2**53:
                lhs_q, rhs_q = lhs[idx] / c, rhs[idx] / c
            else:
                scale = math.exp(-binomial_log(i - 1, d))
                lhs_q, rhs_q = lhs[idx] * scale, rhs[idx] * scale
            violations.append(Violation(i, d, float(lhs_q), float(rhs_q)))
    return FeasibilityReport(not violations, tuple(violations))


def check_invariant_feasible(mu_K: Xdd, tol: float = SLACK_TOL) -> FeasibilityReport:
    """Feasibility of the invariant sequence determined by a final-hop XDD.

    The whole chain reduces to mu(d) >= (d+1)/d * mu(d+1) for
    d = 1..K-2.  Violations are reported in mu-space with i set to d+2,
    the earliest path length at which the expanded constraint binds.
    """
    K = mu_K.k
    violations = []
    for d in range(1, K - 1):
        lhs = mu_K.mu(d)
        rhs = (d + 1) / d * mu_K.mu(d + 1)
        if lhs - rhs < -tol:
            violations.append(Violation(d + 2, d, lhs, rhs))
    return FeasibilityReport(not violations, tuple(violations))


@dataclass(frozen=True)
class Apa:
    """Action probability array: (p_add, p_skip, p_replace) per (hop, degree).

    triples[0] is the fixed hop-1 row [(0, 0, 1)] (incoming degree 0);
    triples[i-1] holds rows for incoming degrees 1..i-1 at hop i.  Rows of
    NaN mark unreachable states (mu_{i-1}(d) = 0): no packet can arrive
    there, and encoders assert they never consult one.
    """

    K: int
    triples: tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for arr in self.triples:
            arr = np.asarray(arr, dtype=float)
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "triples", tuple(frozen))
        if len(self.triples) != self.K:
            raise SequenceValidationError(
                f"APA has {len(self.triples)} hop rows, expected K={self.K}")

    def is_reachable(self, i: int, d: int) -> bool:
        return not np.isnan(self._row(i, d)[0])

    def entry(self, i: int, d: int) -> tuple[float, float, float]:
        """The (p_add, p_skip, p_replace) triple for incoming degree d at hop i."""
        row = self._row(i, d)
        if np.isnan(row[0]):
            raise ProtocolError(f"unreachable APA entry consulted at (i={i}, d={d})")
        return float(row[0]), float(row[1]), float(row[2])

    def _row(self, i: int, d: int) -> np.ndarray:
        if not 1 <= i <= self.K:
            raise RangeError(f"hop {i} outside 1..{self.K}")
        lo = 0 if i == 1 else 1
        if not lo <= d <= i - 1:
            raise RangeError(f"degree {d} invalid for hop {i}")
        return self.triples[i - 1][d - lo]

    def digest(self) -> str:
        """Content hash binding precomputed tables to their source APA."""
        h = hashlib.sha256()
        h.update(b"APA\x00" + self.K.to_bytes(4, "little"))
        for arr in self.triples:
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def derive_apa(seq: XddSequence, tol: float = SLACK_TOL) -> Apa:
    """Derive the APA realizing a feasible sequence.

    Raises InfeasibleSequenceError (with the report) when the sequence
    fails (*): per the necessity proof no APA can realize it.
    """
    report = check_feasible(seq, tol=tol)
    if not report.feasible:
        raise InfeasibleSequenceError(report)
    triples = [np.array([[0.0, 0.0, 1.0]])]
    for i in range(2, seq.K + 1):
        prev = seq.xdds[i - 2].mass
        cur = seq.xdds[i - 1].mass
        rows = np.full((i - 1, 3), np.nan)
        for d in range(1, i):
            denom = prev[d - 1]
            if denom == 0.0:
                continue  # unreachable state, sentinel row
            p_add = cur[d] / denom * (d + 1) / i
            p_skip = cur[d - 1] / denom * (i - d) / i
            p_rep = 1.0 - p_add - p_skip
            if p_rep < -1e-9:
                raise InternalConsistencyError(
                    f"replace probability {p_rep} at (i={i}, d={d}) "
                    "for a sequence that passed the feasibility check")
            if p_rep < 0.0:
                # Facet point: renormalize the rounding artifact away.
                p_rep = 0.0
                s = p_add + p_skip
                p_add /= s
                p_skip /= s
            rows[d - 1] = (p_add, p_skip, p_rep)
        triples.append(rows)
    return Apa(seq.K, tuple(triples))


def exact_induced_sequence(apa: Apa, K_small: int | None = None) -> XddSequence:
    """Brute-force oracle: the XDD sequence an APA actually induces.

    Tracks the exact probability of every XOR-set (as a bitmask over hops)
    through all hops, purely from the APA and the Add/Skip/Replace set
    mechanics.  Verifies the uniformity condition at every hop and returns
    the induced sequence.  Independent of the mu-ratio algebra above, which
    is the point: round-tripping derive_apa through this function is the
    main correctness check of the whole theory.
    """
    K = apa.K if K_small is None else K_small
    if K > apa.K:
        raise RangeError(f"K_small={K} exceeds APA diameter {apa.K}")
    if K > ENUMERATION_LIMIT:
        raise RangeError(f"exact enumeration limited to K <= {ENUMERATION_LIMIT}")

    # Hop 1: the fixed triple always replaces the empty codeword.
    states: dict[int, float] = {1: 1.0}  # bitmask (bit h-1 = hop h) -> probability
    masses = [_collect_mass(states, 1)]
    for i in range(2, K + 1):
        nxt: dict[int, float] = {}
        my_bit = 1 << (i - 1)
        for mask, prob in states.items():
            if prob == 0.0:
                continue
            d = mask.bit_count()
            p_add, p_skip, p_rep = apa.entry(i, d)
            if p_add:
                nxt[mask | my_bit] = nxt.get(mask | my_bit, 0.0) + prob * p_add
            if p_skip:
                nxt[mask] = nxt.get(mask, 0.0) + prob * p_skip
            if p_rep:
                nxt[my_bit] = nxt.get(my_bit, 0.0) + prob * p_rep
        states = nxt
        masses.append(_collect_mass(states, i))
    return sequence_from_masses(masses)


def _collect_mass(states: dict[int, float], i: int) -> np.ndarray:
    """Aggregate set probabilities into an XDD, checking uniformity."""
    by_degree: dict[int, list[float]] = {}
    for mask, prob in states.items():
        by_degree.setdefault(mask.bit_count(), []).append(prob)
    mass = np.zeros(i)
    for d in range(1, i + 1):
        probs = by_degree.get(d, [])
        n_sets = math.comb(i, d)
        total = math.fsum(probs)
        if probs:
            lo, hi = min(probs), max(probs)
            if hi - lo > UNIFORMITY_TOL:
                raise UniformityError(
                    f"size-{d} sets at hop {i} span probabilities [{lo}, {hi}]")
            # Sets never generated carry probability 0; they count too.
            if len(probs) < n_sets and hi > UNIFORMITY_TOL:
                raise UniformityError(
                    f"only {len(probs)}/{n_sets} size-{d} sets reachable at hop {i} "
                    f"with probability {hi}")
        mass[d - 1] = total
    return mass


def q_value(seq: XddSequence, i: int, d: int):
    """q_i(d) of a sequence, as a QValue record."""
    from .xdd import QValue

    return QValue(i, d, mu_to_q(seq.xdd(i), d))


# ---------------------------------------------------------------------------
# APA file format: {"K": int, "p": [[[pA,pS,pR], ...], ...]} where p[i-1]
# lists the triples for hop i (hop 1 has the single degree-0 triple) and
# unreachable entries are null.

def apa_to_json(apa: Apa) -> str:
    hops = []
    for arr in apa.triples:
        rows = []
        for row in arr:
            if np.isnan(row[0]):
                rows.append("null")
            else:
                rows.append("[" + ", ".join(format(v, ".17g") for v in row) + "]")
        hops.append("[" + ", ".join(rows) + "]")
    body = ",\n    ".join(hops)
    return '{\n  "K": %d,\n  "p": [\n    %s\n  ]\n}\n' % (apa.K, body)


def apa_from_json(text: str) -> Apa:
    doc = json.loads(text)
    K = int(doc["K"])
    triples = []
    for i, hop in enumerate(doc["p"], start=1):
        n_rows = 1 if i == 1 else i - 1
        if len(hop) != n_rows:
            raise SequenceValidationError(f"hop {i} has {len(hop)} rows, expected {n_rows}")
        arr = np.full((n_rows, 3), np.nan)
        for j, row in enumerate(hop):
            if row is not None:
                arr[j] = row
        triples.append(arr)
    return Apa(K, tuple(triples))


def write_apa(apa: Apa, path) -> None:
    _atomic_write_text(path, apa_to_json(apa))


def read_apa(path) -> Apa:
    with open(path, "r", encoding="utf-8") as fh:
        return apa_from_json(fh.read())
