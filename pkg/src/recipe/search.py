"""Code discovery: greedy reversed search and quadratic-objective search.

Two searchers, two polytopes:

* hrs_search walks the full feasible polytope hop by hop, backward from a
  final-hop XDD (Robust Soliton by default).  Feasible predecessors of
  mu_i are parameterized exactly by scaled slacks gamma_d >= 0 with
  sum(gamma) = q_i(1) = mu_i(1)/i, so candidates are Dirichlet draws on
  that simplex, scored by simulated mean decode cost.

* qps_search minimizes a mean-field approximation of the expected decode
  cost over the K-dimensional polytope of invariant sequences (simplex
  intersected with the chain mu(d) >= (d+1)/d * mu(d+1)).  The original
  formulation is a nonconvex QP; here it is solved by multi-start
  projected gradient descent, with the projection computed by Dykstra's
  alternating scheme (simplex projection + isotonic regression on
  nu(d) = d*mu(d), in which the chain is plain monotonicity).

The mean-field model: messages decode in some order j = 1..K; message j
either was already released by earlier decoding (probability roughly
S_j * Prel_j with S_j the codewords consumed so far) or waits for a
geometric number of fresh codewords with success probability Psuc_j:

    t_j = max(0, 1 - S_j * Prel_j) / Psuc_j,      S_j = t_1 + .. + t_{j-1},
    Prel_j = sum_d (K-j+1) C(j-2,d-2) mu(d) / C(K,d),
    Psuc_j = sum_d (K-j+1) C(j-1,d-1) mu(d) / C(K,d).

The optional second-order toggle replaces S_j*Prel_j with
S_j*Prel_j - (S_j*Prel_j)^2 / (2(K-j+1)), compensating for release
collisions.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .decoder import PeelingState
from .distributions import robust_soliton, expand_invariant, shifted_soliton
from .errors import InternalConsistencyError, RangeError
from .feasibility import check_feasible, _rhs_mu
from .xdd import Xdd, XddSequence, binomial_log, sequence_from_masses

# QPS keeps a floor under mu(1): the first decode requires Psuc_1 = mu(1),
# and peeling needs degree-1 mass anyway.
MU1_FLOOR = 1e-6


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters for both searchers (none are prescribed by theory)."""

    candidates_per_hop: int = 1000
    trials_per_candidate: int = 2000
    restarts: int = 8
    seed: int = 0
    second_order: bool = False

    def __post_init__(self):
        if min(self.candidates_per_hop, self.trials_per_candidate, self.restarts) < 1:
            raise RangeError("all search counts must be >= 1")


@dataclass(frozen=True)
class MeanFieldTerms:
    """Per-decode-rank pieces of the mean-field objective."""

    K: int
    p_rel: np.ndarray
    p_suc: np.ndarray
    t: np.ndarray
    s: np.ndarray


_COEFF_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _mean_field_coeffs(K: int):
    """Rel[j-1,d-1] and Suc[j-1,d-1] coefficient matrices, log-space built."""
    if K not in _COEFF_CACHE:
        rel = np.zeros((K, K))
        suc = np.zeros((K, K))
        for j in range(1, K + 1):
            base = math.log(K - j + 1)
            for d in range(1, j + 1):
                lkd = binomial_log(K, d)
                if d >= 2:
                    rel[j - 1, d - 1] = math.exp(base + binomial_log(j - 2, d - 2) - lkd)
                suc[j - 1, d - 1] = math.exp(base + binomial_log(j - 1, d - 1) - lkd)
        _COEFF_CACHE[K] = (rel, suc)
    return _COEFF_CACHE[K]


def _mean_field_core(mass: np.ndarray, K: int, second_order: bool):
    rel_m, suc_m = _mean_field_coeffs(K)
    p_rel = rel_m @ mass
    p_suc = suc_m @ mass
    if p_suc[0] <= 0.0:
        raise RangeError("mu(1) = 0: the first message can never be decoded")
    if (p_rel > 1.0 + 1e-9).any() or (p_suc > 1.0 + 1e-9).any():
        raise InternalConsistencyError("mean-field probability above 1")
    t = np.zeros(K)
    s = np.zeros(K)
    running = 0.0
    for j in range(K):
        s[j] = running
        released = running * p_rel[j]
        if second_order:
            released -= 0.5 * released * released / (K - j)
        t[j] = max(0.0, 1.0 - released) / p_suc[j]
        running += t[j]
    return p_rel, p_suc, t, s


def mean_field_objective(mu: Xdd, second_order: bool = False):
    """Approximate expected codewords to decode all K messages.

    Returns (total, MeanFieldTerms).  Deterministic: identical input gives
    bit-identical output.
    """
    K = mu.k
    p_rel, p_suc, t, s = _mean_field_core(np.asarray(mu.mass), K, second_order)
    return float(t.sum()), MeanFieldTerms(K, p_rel, p_suc, t, s)


def _objective_and_grad(mass: np.ndarray, K: int, second_order: bool):
    """Objective and its exact gradient (forward accumulation through the
    t-recursion; clamped terms contribute zero gradient)."""
    rel_m, suc_m = _mean_field_coeffs(K)
    p_rel = rel_m @ mass
    p_suc = suc_m @ mass
    if p_suc[0] <= 0.0:
        raise RangeError("mu(1) = 0: the first message can never be decoded")
    t_total = 0.0
    grad = np.zeros(K)
    running = 0.0
    d_running = np.zeros(K)
    for j in range(K):
        rel_j = running * p_rel[j]
        d_rel_j = d_running * p_rel[j] + running * rel_m[j]
        if second_order:
            released = rel_j - 0.5 * rel_j * rel_j / (K - j)
            d_released = (1.0 - rel_j / (K - j)) * d_rel_j
        else:
            released, d_released = rel_j, d_rel_j
        num = 1.0 - released
        if num <= 0.0:
            t_j = 0.0
            d_t_j = np.zeros(K)
        else:
            t_j = num / p_suc[j]
            d_t_j = (-d_released * p_suc[j] - num * suc_m[j]) / (p_suc[j] ** 2)
        t_total += t_j
        grad += d_t_j
        running += t_j
        d_running = d_running + d_t_j
    return t_total, grad


# ---------------------------------------------------------------------------
# Projection onto {simplex} n {chain mu(d) >= (d+1)/d mu(d+1), d <= K-2}.


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _isotonic_nonincreasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted least-squares fit of a nonincreasing vector (PAVA)."""
    vals = []
    wts = []
    counts = []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        counts.append(1)
        while len(vals) > 1 and vals[-2] < vals[-1]:
            v2, w2, c2 = vals.pop(), wts.pop(), counts.pop()
            v1, w1, c1 = vals.pop(), wts.pop(), counts.pop()
            wt = w1 + w2
            vals.append((v1 * w1 + v2 * w2) / wt)
            wts.append(wt)
            counts.append(c1 + c2)
    out = np.empty(y.size)
    pos = 0
    for v, c in zip(vals, counts):
        out[pos:pos + c] = v
        pos += c
    return out


def _project_chain_cone(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {mu >= 0, d*mu(d) nonincreasing for
    d <= K-1}.  In nu = d*mu coordinates the chain is monotonicity, and
    the mu-space metric becomes weights 1/d^2."""
    K = v.size
    if K == 1:
        return np.maximum(v, 0.0)
    d = np.arange(1, K + 1, dtype=float)
    nu = v * d
    w = 1.0 / d**2
    head = _isotonic_nonincreasing(nu[:K - 1], w[:K - 1])
    out = np.empty(K)
    out[:K - 1] = np.maximum(head, 0.0) / d[:K - 1]
    out[K - 1] = max(v[K - 1], 0.0)
    return out


def project_invariant_polytope(v: np.ndarray, iters: int = 60,
                               mu1_floor: float = MU1_FLOOR) -> np.ndarray:
    """Dykstra's alternating projection onto the invariant-feasible set,
    finishing with an exact restoration pass (cone projection, positivity,
    normalization) so the output always satisfies every constraint."""
    x = np.asarray(v, dtype=float).copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    # No movement-based early exit: Dykstra's iterate can stall for a few
    # rounds while the correction vectors still evolve.
    for _ in range(iters):
        y = _project_chain_cone(x + p)
        p = x + p - y
        x = _project_simplex(y + q)
        q = y + q - x
    x = _project_chain_cone(x)
    x = np.maximum(x, 0.0)
    x[0] = max(x[0], mu1_floor)
    x /= x.sum()
    if x[0] < mu1_floor:
        x[0] = mu1_floor
        x /= x.sum()
    return x


# The descent runs in difference coordinates of nu(d) = d*mu(d): with
# delta_e = nu(e) - nu(e+1) (e <= K-2), delta_{K-1} = nu(K-1) and
# delta_K = nu(K), the chain becomes plain nonnegativity and the simplex
# becomes the weighted simplex {delta >= 0, w . delta = 1} with
# w_e = H_e (harmonic number) for e <= K-1 and w_K = 1/K.  Facets are
# coordinate planes there, so gradient steps do not zigzag against the
# chain the way they do in mu-space.


def _delta_weights(K: int) -> np.ndarray:
    w = np.cumsum(1.0 / np.arange(1, K + 1))
    w[K - 1] = 1.0 / K
    return w


def _mass_from_delta(delta: np.ndarray) -> np.ndarray:
    K = delta.size
    nu = np.empty(K)
    nu[:K - 1] = np.cumsum(delta[K - 2::-1])[::-1]
    nu[K - 1] = delta[K - 1]
    return nu / np.arange(1, K + 1)


def _delta_from_mass(mass: np.ndarray) -> np.ndarray:
    K = mass.size
    nu = mass * np.arange(1, K + 1)
    delta = np.empty(K)
    delta[:K - 2] = nu[:K - 2] - nu[1:K - 1]
    delta[K - 2] = nu[K - 2]
    delta[K - 1] = nu[K - 1]
    return np.maximum(delta, 0.0)


def _grad_to_delta(g_mu: np.ndarray) -> np.ndarray:
    K = g_mu.size
    g_nu = g_mu / np.arange(1, K + 1)
    g_delta = np.empty(K)
    g_delta[:K - 1] = np.cumsum(g_nu[:K - 1])
    g_delta[K - 1] = g_nu[K - 1]
    return g_delta


def _project_weighted_simplex(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, w . x = 1} (w > 0)."""
    b = y / w
    order = np.argsort(b)[::-1]
    cy = np.cumsum((y * w)[order])
    cw = np.cumsum((w * w)[order])
    theta = (cy - 1.0) / cw
    valid = np.nonzero(b[order] - theta > 0)[0]
    if valid.size == 0:
        x = np.zeros_like(y)
        x[np.argmax(y / w)] = 1.0 / w[np.argmax(y / w)]
        return x
    t = theta[valid[-1]]
    return np.maximum(y - t * w, 0.0)


def _qps_descend(mass: np.ndarray, K: int, second_order: bool,
                 max_iters: int = 2000, trace=None, tag: int = 0):
    """Projected gradient descent with backtracking from one start point."""
    w = _delta_weights(K)
    delta = _project_weighted_simplex(_delta_from_mass(project_invariant_polytope(mass)), w)
    x = _mass_from_delta(delta)
    f, g = _objective_and_grad(x, K, second_order)
    gd = _grad_to_delta(g)
    lr = 0.25 / max(np.abs(gd).max(), 1e-12)
    for it in range(max_iters):
        improved = False
        while lr > 1e-16:
            dy = _project_weighted_simplex(delta - lr * gd, w)
            y = _mass_from_delta(dy)
            fy, gy = _objective_and_grad(y, K, second_order)
            if fy < f - 1e-13:
                delta, x, f = dy, y, fy
                gd = _grad_to_delta(gy)
                lr *= 1.4
                improved = True
                break
            lr *= 0.5
        if trace is not None:
            trace.append((tag, it, f))
        if not improved:
            break
    return x, f


def _qps_descend_job(args):
    start, K, second_order, tag = args
    trace = []
    x, f = _qps_descend(start, K, second_order, trace=trace, tag=tag)
    return x, f, trace


def qps_search(K: int, config: SearchConfig = SearchConfig(),
               trace: list | None = None, threads: int = 1) -> XddSequence:
    """Search invariant sequences for low mean-field decode cost.

    Multi-start: the Shifted Soliton final-hop XDD (always kept as the
    incumbent, so the result is never worse than that seed), uniform and
    geometric shapes, plus `restarts` random Dirichlet starts; starts
    descend independently (in `threads` processes when asked, with
    identical results either way).  Returns the full expanded sequence,
    which is feasible by construction and checked.
    """
    if K < 1:
        raise RangeError(f"diameter must be positive, got K={K}")
    if K == 1:
        return sequence_from_masses([[1.0]])
    rng = np.random.default_rng(config.seed)
    d = np.arange(1, K + 1, dtype=float)
    starts = [
        np.asarray(shifted_soliton(K).mass, dtype=float),
        np.full(K, 1.0 / K),
        0.5 ** d,
        0.8 ** d,
    ]
    for _ in range(config.restarts):
        starts.append(rng.dirichlet(np.ones(K)))
    jobs = [(np.asarray(start, dtype=float), K, config.second_order, tag)
            for tag, start in enumerate(starts)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_qps_descend_job, jobs))
    else:
        results = [_qps_descend_job(j) for j in jobs]
    best_x, best_f = None, math.inf
    for x, f, job_trace in results:
        if trace is not None:
            trace.extend(job_trace)
        if f < best_f:
            best_x, best_f = x, f
    ss_f, _ = mean_field_objective(shifted_soliton(K), config.second_order)
    if best_f > ss_f + 1e-9:
        raise InternalConsistencyError("search ended worse than its seed")
    seq = expand_invariant(Xdd(K, best_x))
    report = check_feasible(seq)
    if not report.feasible:
        raise InternalConsistencyError("search returned an infeasible sequence")
    return seq


# ---------------------------------------------------------------------------
# HRS: backward greedy search over the full feasible polytope.


def slack_budget(mu_i: Xdd) -> float:
    """Total scaled slack available to any feasible predecessor of mu_i;
    equals q_i(1) = mu_i(1)/i (see verify_slack_budget for the proof
    obligation, discharged by exact arithmetic in the tests)."""
    return mu_i.mu(1) / mu_i.k


def verify_slack_budget(mu_i) -> Fraction:
    """Exact-arithmetic oracle for the slack budget identity: computes
    1 - sum_d C(i-1,d) (q_i(d) + q_i(d+1)) with big-integer rationals.

    Accepts an Xdd or any iterable of masses (floats or Fractions).  The
    identity budget = q_i(1) is an algebraic fact about distributions that
    sum to exactly 1, so exactness tests feed exact rationals; float
    masses carry their representation error into the result.
    """
    if isinstance(mu_i, Xdd):
        masses = [Fraction(float(v)) for v in mu_i.mass]
    else:
        masses = [Fraction(v) for v in mu_i]
    i = len(masses)
    if i == 1:
        return Fraction(0)
    q = [Fraction(0)] * (i + 2)
    for d in range(1, i + 1):
        q[d] = masses[d - 1] / math.comb(i, d)
    total = Fraction(0)
    for d in range(1, i):
        total += math.comb(i - 1, d) * (q[d] + q[d + 1])
    return 1 - total


def feasible_predecessor_base(mu_i: Xdd) -> np.ndarray:
    """The zero-slack predecessor of mu_i in mu-space:
    base(d) = mu_i(d)(i-d)/i + mu_i(d+1)(d+1)/i for d = 1..i-1."""
    return _rhs_mu(np.asarray(mu_i.mass), mu_i.k)


def sample_feasible_predecessors(mu_i: Xdd, n: int, rng) -> np.ndarray:
    """n mass vectors for path length i-1, uniformly slack-sampled.

    Every row is base + gamma with gamma Dirichlet-uniform on the scaled
    slack simplex of total q_i(1); every row is a valid distribution and
    satisfies the hop-(i) feasibility constraints by construction.
    """
    i = mu_i.k
    base = feasible_predecessor_base(mu_i)
    budget = slack_budget(mu_i)
    if i - 1 == 1:
        gammas = np.full((n, 1), budget)
    else:
        gammas = rng.dirichlet(np.ones(i - 1), size=n) * budget
    return base[None, :] + gammas


def random_feasible_sequence(K: int, rng, mu_K: Xdd | None = None) -> XddSequence:
    """A random feasible sequence: random (or given) final-hop XDD, then
    one uniformly slack-sampled predecessor per hop, backward."""
    if mu_K is None:
        mu_K = Xdd(K, rng.dirichlet(np.ones(K)))
    masses = [np.asarray(mu_K.mass)]
    cur = mu_K
    for i in range(K, 1, -1):
        mass = sample_feasible_predecessors(cur, 1, rng)[0]
        cur = Xdd(i - 1, mass / mass.sum())
        masses.append(np.asarray(cur.mass))
    return sequence_from_masses(list(reversed(masses)))


class _ScoringBank:
    """Common random numbers for candidate scoring at one path length.

    Per (trial, codeword): one uniform (degree draw through a candidate's
    CDF) and one random hop order (the degree-d XOR-set is the order's
    first d hops, so candidates differing only in degree share sets).
    Incomplete trials score at the bank's cap, pessimistically.
    """

    def __init__(self, m: int, trials: int, rng, cap_factor: int = 6):
        self.m = m
        self.trials = trials
        self.cap = max(cap_factor * m, 12)
        self.u = rng.random((trials, self.cap))
        orders = np.tile(np.arange(m, dtype=np.int16), (trials * self.cap, 1))
        self.orders = rng.permuted(orders, axis=1).reshape(trials, self.cap, m)

    def score(self, mass: np.ndarray) -> float:
        cdf = np.cumsum(mass)
        cdf[-1] = 1.0
        degrees = np.searchsorted(cdf, self.u, side="right") + 1
        np.clip(degrees, 1, self.m, out=degrees)
        total = 0
        for t in range(self.trials):
            state = PeelingState(self.m)
            used = 0
            row_deg = degrees[t]
            row_ord = self.orders[t]
            while used < self.cap:
                d = row_deg[used]
                mask = 0
                for h in row_ord[used, :d]:
                    mask |= 1 << int(h)
                state.insert(mask, 0)
                used += 1
                if state.complete:
                    break
            total += used
        return total / self.trials


def hrs_search(K: int, config: SearchConfig = SearchConfig(),
               mu_K: Xdd | None = None, trace: list | None = None) -> XddSequence:
    """Backward greedy search from a final-hop XDD (Robust Soliton default).

    At each hop the feasible predecessors are slack-sampled and scored by
    simulated mean decode cost under common random numbers; the best
    candidate becomes the previous hop's XDD.  The result is feasible by
    construction and checked before returning.
    """
    if K < 1:
        raise RangeError(f"diameter must be positive, got K={K}")
    if mu_K is None:
        mu_K = robust_soliton(K)
    if mu_K.k != K:
        raise RangeError(f"starting XDD has block size {mu_K.k}, expected {K}")
    if K == 1:
        return sequence_from_masses([[1.0]])
    rng = np.random.default_rng(config.seed)
    masses = [np.asarray(mu_K.mass)]
    cur = mu_K
    for i in range(K, 1, -1):
        cands = sample_feasible_predecessors(cur, config.candidates_per_hop, rng)
        if i - 1 == 1:
            best = cands[0]
        else:
            bank = _ScoringBank(i - 1, config.trials_per_candidate,
                                np.random.default_rng(config.seed ^ (i << 20)))
            scores = [bank.score(c) for c in cands]
            best = cands[int(np.argmin(scores))]
            if trace is not None:
                trace.append((i - 1, float(min(scores))))
        best = best / best.sum()
        cur = Xdd(i - 1, best)
        masses.append(best)
    seq = sequence_from_masses(list(reversed(masses)))
    report = check_feasible(seq)
    if not report.feasible:
        raise InternalConsistencyError("search returned an infeasible sequence")
    return seq
