"""XOR degree distributions (XDDs), XDD sequences, and stable combinatorics.

An LT codeword is the XOR of a uniformly random size-d subset of the first
i message blocks; the distribution of d is the XDD mu_i.  Under that
uniformity, the probability of any one specific size-d subset is

    q_i(d) = mu_i(d) / C(i, d),

which is the quantity all the feasibility algebra is written in.  Because
C(i, d) is astronomically large for network-diameter-sized i, probabilities
are stored in mu-space and q-values are only ever formed through exact
ratio identities or log-space binomials.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, SequenceValidationError

# Normalization tolerances: constructed distributions must sum to 1 much
# more tightly than ones re-read from decimal text.
SUM_TOL = 1e-12
SUM_TOL_FILE = 1e-9

# Largest binomial that fits a double exactly; below this mu/C is computed
# by direct division, above it in log space.
_EXACT_COMB_LIMIT = 2**53


def binomial_log(n: int, r: int) -> float:
    """Return ln C(n, r) via log-gamma.

    Stays finite for n in the hundreds where C(n, r) itself overflows any
    fixed-width integer.  Exact to ~1e-15 relative when exponentiated.
    """
    if r < 0 or n < 0 or r > n:
        raise RangeError(f"binomial_log requires 0 <= r <= n, got n={n}, r={r}")
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


@dataclass(frozen=True)
class Xdd:
    """XOR degree distribution over degrees 1..k for one path length.

    mass[d-1] is the probability of XOR degree d.  Degrees are 1-based
    everywhere; degree 0 never appears here (the binomial baseline handles
    its own empty-codeword mass before constructing an Xdd).
    """

    k: int
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)
        if self.k < 1:
            raise RangeError(f"block size must be positive, got k={self.k}")
        issues = validate_xdd(self)
        if issues:
            raise SequenceValidationError(f"invalid XDD (k={self.k}): " + "; ".join(issues))

    def mu(self, d: int) -> float:
        if not 1 <= d <= self.k:
            raise RangeError(f"degree {d} outside 1..{self.k}")
        return float(self.mass[d - 1])

    def __len__(self):
        return self.k


def validate_xdd(xdd, tol: float = SUM_TOL) -> list[str]:
    """Report every invariant violation of an XDD; empty list iff valid.

    Accepts either an Xdd or a raw (k, mass) pair so that candidate vectors
    can be checked before construction.
    """
    if isinstance(xdd, Xdd):
        k, mass = xdd.k, xdd.mass
    else:
        k, mass = xdd
        mass = np.asarray(mass, dtype=float)
    issues = []
    if len(mass) != k:
        issues.append(f"mass has {len(mass)} entries, expected k={k}")
        return issues
    finite = np.isfinite(mass)
    for idx in np.nonzero(~finite)[0]:
        issues.append(f"non-finite mass at d={idx + 1}")
    for idx in np.nonzero(finite & (mass < 0.0))[0]:
        issues.append(f"negativity violation at d={idx + 1} (mass={mass[idx]!r})")
    for idx in np.nonzero(finite & (mass > 1.0 + tol))[0]:
        issues.append(f"mass above 1 at d={idx + 1} (mass={mass[idx]!r})")
    total = float(np.sum(mass))
    if abs(total - 1.0) > tol:
        issues.append(f"sum violation at {total!r}")
    return issues


def mu_to_q(xdd: Xdd, d: int) -> float:
    """Probability q(d) of one specific size-d XOR-set: mu(d) / C(k, d).

    Uses exact integer division while C(k, d) fits a double exactly and
    falls back to log space beyond that, so no intermediate overflows.
    """
    m = xdd.mu(d)  # range-checks d
    if m == 0.0:
        return 0.0
    c = math.comb(xdd.k, d)
    if c <= _EXACT_COMB_LIMIT:
        return m / c
    return math.exp(math.log(m) - binomial_log(xdd.k, d))


@dataclass(frozen=True)
class QValue:
    """One uniform XOR-set probability q_i(d) with its (hop, degree) index."""

    i: int
    d: int
    value: float


def xdd_to_q_table(xdd: Xdd) -> np.ndarray:
    """All q(d), d = 1..k, for one XDD."""
    return np.array([mu_to_q(xdd, d) for d in range(1, xdd.k + 1)])


def xdd_from_q_table(k: int, q: np.ndarray) -> Xdd:
    """Rebuild an XDD from its per-set probabilities: mu(d) = q(d) * C(k, d)."""
    q = np.asarray(q, dtype=float)
    mass = np.empty(k)
    for d in range(1, k + 1):
        c = math.comb(k, d)
        if q[d - 1] == 0.0:
            mass[d - 1] = 0.0
        elif c <= _EXACT_COMB_LIMIT:
            mass[d - 1] = q[d - 1] * c
        else:
            mass[d - 1] = math.exp(math.log(q[d - 1]) + binomial_log(k, d))
    return Xdd(k, mass)


@dataclass(frozen=True)
class XddSequence:
    """One XDD per possible path length 1..K; the object defining a code.

    xdds[i-1] has block size i.  mu_1 is always the point mass on degree 1
    because the first switch always replaces the empty codeword.
    """

    K: int
    xdds: tuple[Xdd, ...]

    def __post_init__(self):
        object.__setattr__(self, "xdds", tuple(self.xdds))
        if self.K < 1:
            raise RangeError(f"diameter must be positive, got K={self.K}")
        if len(self.xdds) != self.K:
            raise SequenceValidationError(
                f"sequence has {len(self.xdds)} XDDs, expected K={self.K}")
        for i, xdd in enumerate(self.xdds, start=1):
            if xdd.k != i:
                raise SequenceValidationError(
                    f"xdds[{i}] has block size {xdd.k}, expected {i}")

    def xdd(self, i: int) -> Xdd:
        """The XDD for path length i (1-based)."""
        if not 1 <= i <= self.K:
            raise RangeError(f"path length {i} outside 1..{self.K}")
        return self.xdds[i - 1]

    def mu(self, i: int, d: int) -> float:
        return self.xdd(i).mu(d)


def sequence_from_masses(masses) -> XddSequence:
    """Build a sequence from raw per-hop mass vectors (masses[i-1] has length i)."""
    xdds = tuple(Xdd(i, m) for i, m in enumerate(masses, start=1))
    return XddSequence(len(xdds), xdds)


# ---------------------------------------------------------------------------
# Sequence file format: {"K": int, "mu": [[...], ...]} where mu[i-1] is the
# length-i mass vector for path length i.  Writers emit 17 significant
# digits so that decimal text round-trips every double exactly.

def sequence_to_json(seq: XddSequence) -> str:
    rows = []
    for xdd in seq.xdds:
        rows.append("[" + ", ".join(format(v, ".17g") for v in xdd.mass) + "]")
    body = ",\n    ".join(rows)
    return '{\n  "K": %d,\n  "mu": [\n    %s\n  ]\n}\n' % (seq.K, body)


def sequence_from_json(text: str) -> XddSequence:
    doc = json.loads(text)
    try:
        K = int(doc["K"])
        mu = doc["mu"]
    except (KeyError, TypeError) as exc:
        raise SequenceValidationError(f"malformed sequence document: {exc}") from exc
    if len(mu) != K:
        raise SequenceValidationError(f"document K={K} but {len(mu)} mass vectors")
    xdds = []
    for i, row in enumerate(mu, start=1):
        issues = validate_xdd((i, row), tol=SUM_TOL_FILE)
        if issues:
            raise SequenceValidationError(f"mu[{i}]: " + "; ".join(issues))
        # Renormalize text-roundtrip drift so downstream code sees the
        # constructed-distribution tolerance again.
        mass = np.asarray(row, dtype=float)
        xdds.append(Xdd(i, mass / mass.sum()))
    return XddSequence(K, tuple(xdds))


def write_sequence(seq: XddSequence, path) -> None:
    _atomic_write_text(path, sequence_to_json(seq))


def read_sequence(path) -> XddSequence:
    with open(path, "r", encoding="utf-8") as fh:
        return sequence_from_json(fh.read())


def _atomic_write_text(path, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_bytes(path, blob: bytes) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)
