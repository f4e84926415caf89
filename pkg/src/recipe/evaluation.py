"""End-to-end path simulation and the coding-efficiency harness.

Coding efficiency of a scheme at path length k is the number of delivered
codewords the destination must consume before peeling recovers all k switch
IDs.  The harness runs randomized instances (fresh switch IDs, fresh packet
ids), streams codewords through exactly the per-hop protocol machinery, and
aggregates mean / standard error / 99%-quantile curves over k.

Per-hop encoding is vectorized across packets (the hash is a pure function
of (key, hop, packet id), so whole blocks hash at once); peeling stays a
tight per-trial loop.  Everything is reproducible bit-exactly from
(scheme, K, trials, seed): every trial draws from its own counter-derived
PRNG stream, so results do not depend on batching or thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decoder import PeelingState, PintMode, RecipeDMode, RecipeTMode
from .distributions import PintParams
from .errors import InternalConsistencyError, RangeError
from .feasibility import Apa, derive_apa
from .protocol import (
    ADD,
    REPLACE,
    Avst,
    GlobalHash,
    _apa_threshold_arrays,
    _mix64,
    hash_uniform_array,
    row_select_array,
)
from .xdd import XddSequence, _atomic_write_text

# Packets consumed before a trial is declared incomplete; incomplete trials
# contribute exactly this value to the mean (pessimistic).
CAP_FACTOR = 200

_SEED_C1 = 0xFF51AFD7ED558CCD
_SEED_C2 = 0xC4CEB9FE1A85EC53
_U64 = np.uint64


def derive_seed(master: int, a: int, b: int = 0) -> int:
    """Counter-derived 64-bit seed; independent of evaluation order."""
    return _mix64((master ^ (a * _SEED_C1) ^ (b * _SEED_C2)) & (2**64 - 1))


# ---------------------------------------------------------------------------
# Schemes: each knows how to turn a block of packet ids into the XOR-set
# masks their delivered codewords would carry at path length k, exactly as
# the per-hop protocol (and therefore the decoder's replay) computes them.


class RecipeDScheme:
    """Degree-based protocol parameterized by an APA (or the sequence it
    realizes) and the network hash key."""

    def __init__(self, seq: XddSequence = None, apa: Apa = None,
                 seed: int = 0, label: str = "recipe-d"):
        if apa is None:
            if seq is None:
                raise RangeError("a sequence or an APA is required")
            apa = derive_apa(seq)
        self.apa = apa
        self.gh = GlobalHash(seed)
        self.K = apa.K
        self.label = label
        self.counts_empty = True

    def decode_mode(self):
        return RecipeDMode(self.apa, self.gh)

    def generate_masks(self, k: int, pids: np.ndarray):
        if k > self.K:
            raise RangeError(f"path length {k} beyond diameter {self.K}")
        n = pids.size
        if k <= 64:
            masks = np.ones(n, dtype=_U64)
            deg = np.ones(n, dtype=np.int64)
            for i in range(2, k + 1):
                p_add, p_rep, _ = _apa_threshold_arrays(self.apa, i)
                nu = hash_uniform_array(self.gh, i, pids)
                pa = p_add[deg - 1]
                add = nu < pa
                rep = ~add & (nu < pa + p_rep[deg - 1])
                bit = _U64(1 << (i - 1))
                masks = np.where(rep, bit, masks | np.where(add, bit, _U64(0)))
                deg = np.where(add, deg + 1, np.where(rep, 1, deg))
            return masks
        bm = np.zeros((n, k), dtype=bool)
        bm[:, 0] = True
        deg = np.ones(n, dtype=np.int64)
        for i in range(2, k + 1):
            p_add, p_rep, _ = _apa_threshold_arrays(self.apa, i)
            nu = hash_uniform_array(self.gh, i, pids)
            pa = p_add[deg - 1]
            add = nu < pa
            rep = ~add & (nu < pa + p_rep[deg - 1])
            bm[rep] = False
            bm[add | rep, i - 1] = True
            deg = np.where(add, deg + 1, np.where(rep, 1, deg))
        return _pack_bool_masks(bm)


class RecipeTScheme:
    """Table-based protocol: same table at every switch, row picked per
    packet by the salt-separated hash."""

    def __init__(self, avst: Avst, seed: int = 0, label: str = None):
        self.avst = avst
        self.gh = GlobalHash(seed)
        self.K = avst.K
        self.label = label or f"recipe-t:L={avst.L}"
        self.counts_empty = True

    def decode_mode(self):
        return RecipeTMode(self.avst, self.gh)

    def generate_masks(self, k: int, pids: np.ndarray):
        if k > self.K:
            raise RangeError(f"path length {k} beyond diameter {self.K}")
        rows = self.avst.rows[row_select_array(self.gh, pids, self.avst.L)]
        n = pids.size
        if k <= 64:
            masks = np.zeros(n, dtype=_U64)
            for i in range(1, k + 1):
                act = rows[:, i - 1]
                add = act == ADD
                rep = act == REPLACE
                bit = _U64(1 << (i - 1))
                masks = np.where(rep, bit, masks | np.where(add, bit, _U64(0)))
            return masks
        bm = np.zeros((n, k), dtype=bool)
        for i in range(1, k + 1):
            act = rows[:, i - 1]
            add = act == ADD
            rep = act == REPLACE
            bm[rep] = False
            bm[add | rep, i - 1] = True
        return _pack_bool_masks(bm)


class PintScheme:
    """PINT baseline: with probability alpha the packet carries the
    reservoir-sampled single hop, otherwise every hop XORs in with
    probability p.  The binomial branch can deliver an empty codeword;
    policy "emit" counts it like any delivered packet (a switch really did
    flip a coin for it), policy "condition" never emits it."""

    def __init__(self, params: PintParams, seed: int = 0,
                 empty_policy: str = "emit", K: int = None, label: str = None):
        if empty_policy not in ("emit", "condition"):
            raise RangeError(f"unknown empty-codeword policy {empty_policy!r}")
        self.params = params
        self.gh = GlobalHash(seed)
        self.K = K if K is not None else 2**31
        self.label = label or f"pint:a={params.alpha:g};p={params.p:g}"
        self.counts_empty = empty_policy == "emit"

    def decode_mode(self):
        return PintMode(self.params, self.gh)

    def generate_masks(self, k: int, pids: np.ndarray):
        if k > self.K:
            raise RangeError(f"path length {k} beyond diameter {self.K}")
        n = pids.size
        branch = hash_uniform_array(self.gh, 0, pids) < self.params.alpha
        keep = np.ones(n, dtype=np.int64)
        if k <= 64:
            bmask = np.zeros(n, dtype=_U64)
            for i in range(1, k + 1):
                u = hash_uniform_array(self.gh, i, pids)
                keep = np.where(u < 1.0 / i, i, keep)
                bit = _U64(1 << (i - 1))
                bmask |= np.where(u < self.params.p, bit, _U64(0))
            rmask = np.left_shift(_U64(1), (keep - 1).astype(_U64))
            return np.where(branch, rmask, bmask)
        bm = np.zeros((n, k), dtype=bool)
        for i in range(1, k + 1):
            u = hash_uniform_array(self.gh, i, pids)
            keep = np.where(u < 1.0 / i, i, keep)
            bm[:, i - 1] = u < self.params.p
        bm[branch] = False
        bm[branch, keep[branch] - 1] = True
        return _pack_bool_masks(bm)


def _pack_bool_masks(bm: np.ndarray) -> list:
    """Rows of a boolean hop matrix as arbitrary-width int bitmasks."""
    packed = np.packbits(bm, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


@dataclass(frozen=True)
class TrialResult:
    """One instance: path length, codewords consumed, whether it finished."""

    k: int
    used: int
    completed: bool


def _draw_switch_ids(rng, k: int) -> np.ndarray:
    """k distinct nonzero 32-bit switch IDs."""
    ids = rng.integers(1, 2**32, size=k, dtype=_U64)
    while np.unique(ids).size < k:
        ids = rng.integers(1, 2**32, size=k, dtype=_U64)
    return ids


def _codeword_values(masks, switch_ids: np.ndarray) -> np.ndarray:
    """XOR-sum of the IDs named by each mask (one instance's id vector)."""
    k = switch_ids.size
    if isinstance(masks, np.ndarray):
        vals = np.zeros(masks.shape, dtype=_U64)
        for h in range(k):
            sel = (masks >> _U64(h)) & _U64(1)
            vals ^= sel * switch_ids[h]
        return vals
    out = np.zeros(len(masks), dtype=_U64)
    for j, m in enumerate(masks):
        v = 0
        while m:
            low = m & -m
            v ^= int(switch_ids[low.bit_length() - 1])
            m ^= low
        out[j] = v
    return out


def run_trials(scheme, k: int, seeds) -> tuple[np.ndarray, np.ndarray]:
    """Run one instance per seed; return (used, completed) arrays.

    Codeword generation is batched across the still-active instances per
    round; each instance consumes its own stream in order through the
    peeling decoder and is verified against its ground-truth IDs.
    """
    B = len(seeds)
    cap = CAP_FACTOR * k
    rngs = [np.random.default_rng(s) for s in seeds]
    switch_ids = [_draw_switch_ids(rng, k) for rng in rngs]
    states = [PeelingState(k) for _ in range(B)]
    used = np.zeros(B, dtype=np.int64)
    completed = np.zeros(B, dtype=bool)
    block = min(cap, max(2 * k, 8))
    active = list(range(B))
    while active:
        pid_rows = [rngs[t].integers(0, 2**64, size=block, dtype=_U64) for t in active]
        flat = scheme.generate_masks(k, np.concatenate(pid_rows))
        still = []
        for row, t in enumerate(active):
            masks = flat[row * block:(row + 1) * block]
            vals = _codeword_values(masks, switch_ids[t])
            state = states[t]
            n_used = used[t]
            for j in range(block):
                m = int(masks[j])
                if m == 0 and not scheme.counts_empty:
                    continue
                state.insert(m, int(vals[j]))
                n_used += 1
                if state.complete or n_used >= cap:
                    break
            used[t] = n_used
            if state.complete:
                completed[t] = True
                _verify_resolution(state, switch_ids[t])
            elif n_used >= cap:
                used[t] = cap
                _verify_resolution(state, switch_ids[t])
            else:
                still.append(t)
        active = still
    return used, completed


def _verify_resolution(state: PeelingState, switch_ids: np.ndarray) -> None:
    for hop, value in state.resolved.items():
        if value != int(switch_ids[hop - 1]):
            raise InternalConsistencyError(
                f"hop {hop} decoded to {value}, ground truth {int(switch_ids[hop - 1])}")


def run_instance(k: int, scheme, seed: int) -> TrialResult:
    """One randomized path-tracing instance; `used` is the per-trial
    coding-efficiency statistic (capped at 200k packets)."""
    used, completed = run_trials(scheme, k, [seed])
    return TrialResult(k, int(used[0]), bool(completed[0]))


@dataclass(frozen=True)
class CurvePoint:
    k: int
    trials: int
    mean: float
    stderr: float
    q99: float
    incomplete_rate: float


@dataclass(frozen=True)
class EfficiencyCurve:
    label: str
    K: int
    points: tuple[CurvePoint, ...]

    def point(self, k: int) -> CurvePoint:
        for p in self.points:
            if p.k == k:
                return p
        raise RangeError(f"curve has no point at k={k}")

    def means(self) -> dict[int, float]:
        return {p.k: p.mean for p in self.points}


def _curve_point(scheme, k: int, trials: int, master_seed: int) -> CurvePoint:
    seeds = [derive_seed(master_seed, k, t) for t in range(trials)]
    used, completed = run_trials(scheme, k, seeds)
    mean = float(used.mean())
    stderr = float(used.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    q99 = float(np.sort(used)[math.ceil(0.99 * trials) - 1])
    return CurvePoint(k, trials, mean, stderr, q99, 1.0 - float(completed.mean()))


def _curve_point_job(args):
    return _curve_point(*args)


def efficiency_curve(scheme, K: int, trials: int, seed: int,
                     ks=None, threads: int = 1) -> EfficiencyCurve:
    """Mean/stderr/99%-quantile consumed-codeword statistics for each k.

    `scheme` may also be a bare XddSequence, which runs degree-based.
    Deterministic given (scheme, K, trials, seed) regardless of `threads`:
    every trial's randomness is derived from (seed, k, trial index).
    """
    if isinstance(scheme, XddSequence):
        scheme = RecipeDScheme(seq=scheme, seed=seed)
    if trials < 1:
        raise RangeError("at least one trial per point is required")
    ks = list(ks) if ks is not None else list(range(1, K + 1))
    jobs = [(scheme, k, trials, seed) for k in ks]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_curve_point_job, jobs))
    else:
        points = [_curve_point_job(j) for j in jobs]
    return EfficiencyCurve(scheme.label, K, tuple(points))


def compare_t_vs_d(seq: XddSequence, K: int, L_values, trials: int, seed: int,
                   ks=None, threads: int = 1) -> dict[str, EfficiencyCurve]:
    """Table-based approximation quality study: one curve per table size
    against the exact degree-based protocol, from one derived APA."""
    from .protocol import generate_avst

    apa = derive_apa(seq)
    curves = {}
    d_scheme = RecipeDScheme(apa=apa, seed=seed, label="recipe-d")
    curves["recipe-d"] = efficiency_curve(d_scheme, K, trials, seed, ks=ks, threads=threads)
    for L in L_values:
        avst = generate_avst(apa, L, derive_seed(seed, 1_000_000 + L))
        t_scheme = RecipeTScheme(avst, seed=seed)
        curves[t_scheme.label] = efficiency_curve(
            t_scheme, K, trials, seed, ks=ks, threads=threads)
    return curves


def mean_curve_gap(curve_a: EfficiencyCurve, curve_b: EfficiencyCurve) -> float:
    """Mean absolute per-k difference of two mean-efficiency curves."""
    means_b = curve_b.means()
    gaps = [abs(p.mean - means_b[p.k]) for p in curve_a.points if p.k in means_b]
    return float(np.mean(gaps))


def tune_pint(K: int, tune_k: int = None, trials: int = 400, seed: int = 0,
              alphas=None, ps=None):
    """Grid-tune the PINT baseline's (alpha, p) for a network of diameter K.

    The grid is alpha in {0, 0.05, .., 1} and p in {1/K, .., 10/K}; the
    objective is the mean consumed codewords at path length `tune_k`, with
    common random numbers across grid points.  `tune_k` defaults to K/2,
    the deployment's estimated typical path length: the baseline protocol
    fixes (alpha, p) network-wide, so it is tuned for typical paths and
    pays for the mismatch elsewhere.  (Tuning at k = K itself would make
    the baseline nearly optimal at exactly that one length: measured
    against it, even a centralized Robust Soliton code gains ~1% there.)

    Returns (best PintParams, list of (alpha, p, mean) grid results).
    """
    if tune_k is None:
        tune_k = max(1, K // 2)
    if alphas is None:
        alphas = [round(0.05 * j, 2) for j in range(21)]
    if ps is None:
        ps = [j / K for j in range(1, 11)]
    seeds = [derive_seed(seed, tune_k, t) for t in range(trials)]
    results = []
    best = None
    for alpha in alphas:
        for p in ps:
            if not 0.0 < p < 1.0:
                continue
            scheme = PintScheme(PintParams(alpha, p), seed=seed)
            used, _ = run_trials(scheme, tune_k, seeds)
            mean = float(used.mean())
            results.append((alpha, p, mean))
            if best is None or mean < best[2]:
                best = (alpha, p, mean)
    return PintParams(best[0], best[1]), results


def pint_scheme_for(K: int, params: PintParams, seed: int = 0,
                    empty_policy: str = "emit") -> PintScheme:
    return PintScheme(params, seed=seed, empty_policy=empty_policy, K=K)


def degree_histogram(scheme, k: int, n_packets: int, seed: int) -> np.ndarray:
    """Empirical delivered-XOR-degree counts (index d-1 = degree d), from
    n_packets fresh packet ids.  Degree-0 deliveries (PINT binomial branch)
    are excluded; the caller compares against the conditioned XDD."""
    rng = np.random.default_rng(seed)
    counts = np.zeros(k, dtype=np.int64)
    chunk = 1 << 16
    remaining = n_packets
    while remaining > 0:
        n = min(chunk, remaining)
        masks = scheme.generate_masks(k, rng.integers(0, 2**64, size=n, dtype=_U64))
        if isinstance(masks, np.ndarray):
            degrees = _popcount_u64(masks)
        else:
            degrees = np.array([m.bit_count() for m in masks])
        got = np.bincount(degrees, minlength=k + 1)[1:k + 1]
        counts += got
        remaining -= n
    return counts


def _popcount_u64(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=np.int64)
    x = x.copy()
    while x.any():
        out += (x & _U64(1)).astype(np.int64)
        x >>= _U64(1)
    return out


# ---------------------------------------------------------------------------
# Curve CSV: one row per (scheme, k).

CSV_HEADER = "scheme,K,k,trials,mean,stderr,q99,incomplete_rate"


def curves_to_csv(curves) -> str:
    lines = [CSV_HEADER]
    for curve in curves:
        for p in curve.points:
            lines.append(
                f"{curve.label},{curve.K},{p.k},{p.trials},"
                f"{p.mean:.17g},{p.stderr:.17g},{p.q99:.17g},{p.incomplete_rate:.17g}")
    return "\n".join(lines) + "\n"


def write_curves_csv(path, curves) -> None:
    _atomic_write_text(path, curves_to_csv(curves))


def read_curves_csv(path) -> list[EfficiencyCurve]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise RangeError(f"{path} is not a curve CSV")
    grouped: dict[tuple, list[CurvePoint]] = {}
    for ln in lines[1:]:
        label, K, k, trials, mean, stderr, q99, inc = ln.split(",")
        grouped.setdefault((label, int(K)), []).append(CurvePoint(
            int(k), int(trials), float(mean), float(stderr), float(q99), float(inc)))
    return [EfficiencyCurve(label, K, tuple(pts)) for (label, K), pts in grouped.items()]


def default_threads() -> int:
    return os.cpu_count() or 1
