"""Plug-in bounders for joint probabilities of partial assignments.

Two implementations of the same contract:

* ``PriorMassBounder`` ("bf"): lower 0, upper = exact prior mass of the
  assignment. Trivially sound, extremely cheap.
* ``ChainPropagationBounder`` ("abdp"): bounds each evidence conditional in
  the chain factorization P(a, e) = prod_j P(e_j | e_<j, a) * P(a) by
  iterative bound propagation (per-variable linear programs over Markov
  boundary configurations, solved by a sound greedy relaxation), and always
  intersects with the prior-mass interval so it can only be tighter.

Both also produce batched per-tuple tables for the engine: one joint interval
plus, for every still-free variable, bounds on P(value, partial, e) for all
its values at once — two plug-in invocations per partial tuple.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .exact import eliminate
from .model import (
    BayesianNetwork,
    Evidence,
    PartialAssignment,
    merge_assignment,
    relevant_keep_set,
)

DEFAULT_K = 2**10
DEFAULT_MAX_ITERS = 50
DEFAULT_TOL = 1e-6


class BlanketLpInfeasible(ValueError):
    """The constraint set admits no distribution (caller widens to [0,1])."""


@dataclass
class MarginalBounds:
    """Per-variable, per-value intervals on P(x | e)."""

    lows: dict[int, np.ndarray]
    highs: dict[int, np.ndarray]
    iterations: int = 0
    skipped: frozenset[int] = frozenset()

    def interval(self, var: int, value: int) -> tuple[float, float]:
        return float(self.lows[var][value]), float(self.highs[var][value])


@dataclass
class BlanketLp:
    """One per-variable optimization: extremize sum_b P(x|b) q(b) over
    boundary-configuration distributions q consistent with the current
    per-member marginal intervals.

    ``members`` holds, per unobserved boundary variable: (variable id,
    value-per-config column, lower bounds per value, upper bounds per value).
    Observed boundary members are pinned inside the coefficients.
    """

    query: tuple[int, int]
    coeffs: np.ndarray
    members: tuple[tuple[int, np.ndarray, np.ndarray, np.ndarray], ...]


def solve_blanket_lp_exact(lp: BlanketLp, sense: str) -> float:
    """Exact LP optimum via scipy's HiGHS solver (test oracle, not the
    production path). Raises BlanketLpInfeasible when no q satisfies the
    constraints."""
    from scipy.optimize import linprog

    n = lp.coeffs.shape[0]
    if n > 2**10:
        raise ValueError("blanket state space too large for the exact solver")
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be min or max, got {sense!r}")
    rows = []
    rhs = []
    for _var, col, lows, highs in lp.members:
        for v in range(len(lows)):
            ind = (col == v).astype(np.float64)
            rows.append(ind)
            rhs.append(highs[v])
            rows.append(-ind)
            rhs.append(-lows[v])
    a_ub = np.array(rows) if rows else None
    b_ub = np.array(rhs) if rhs else None
    c = lp.coeffs if sense == "min" else -lp.coeffs
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.ones((1, n)),
        b_eq=np.array([1.0]),
        bounds=(0.0, None),
        method="highs",
    )
    if res.status == 2:
        raise BlanketLpInfeasible("no boundary distribution satisfies the constraints")
    if not res.success:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(res.fun) if sense == "min" else float(-res.fun)


def _single_member_opt(coeffs, col, lows, highs, maximize: bool):
    """Exact optimum of the relaxation keeping only one member's constraints.

    Within a value group all mass may sit on the best configuration, so the
    relaxation reduces to a fractional allocation over groups: mandatory
    lower-bound mass first, then the remainder poured greedily under the
    upper caps. Returns None when even this single-member system is
    infeasible (then the full LP is infeasible too).
    """
    d = len(lows)
    if np.any(highs < lows - 1e-15):
        return None
    fill = -np.inf if maximize else np.inf
    best = np.full(d, fill)
    if maximize:
        np.maximum.at(best, col, coeffs)
    else:
        np.minimum.at(best, col, coeffs)
    empty = ~np.isfinite(best)
    if np.any(lows[empty] > 1e-15):
        return None  # mandatory mass in a value no configuration provides
    lows = np.where(empty, 0.0, np.clip(lows, 0.0, 1.0))
    highs = np.where(empty, 0.0, np.clip(highs, 0.0, 1.0))
    rem = 1.0 - math.fsum(lows.tolist())
    if rem < -1e-12:
        return None
    rem = max(rem, 0.0)
    safe_best = np.where(empty, 0.0, best)
    value = float(np.dot(lows, safe_best))
    caps = np.clip(highs - lows, 0.0, None)
    order = np.argsort(-safe_best if maximize else safe_best, kind="stable")
    for g in order:
        if rem <= 0.0:
            break
        if empty[g]:
            continue
        take = min(rem, float(caps[g]))
        value += take * float(safe_best[g])
        rem -= take
    if rem > 1e-9:
        return None  # sum of upper caps below 1: infeasible
    return value


def solve_blanket_lp_greedy(lp: BlanketLp, sense: str) -> float:
    """Sound greedy relaxation: never below the exact max / above the exact min.

    Takes the best (tightest) single-member relaxation; every such optimum
    brackets the exact one from the safe side, so does their min/max. With no
    members (or all infeasible, which implies the exact LP is infeasible) the
    coefficient extremes are returned.
    """
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be min or max, got {sense!r}")
    maximize = sense == "max"
    candidates = []
    for _var, col, lows, highs in lp.members:
        opt = _single_member_opt(lp.coeffs, col, lows, highs, maximize)
        if opt is not None:
            candidates.append(opt)
    if not candidates:
        return float(lp.coeffs.max()) if maximize else float(lp.coeffs.min())
    return min(candidates) if maximize else max(candidates)


# ---------------------------------------------------------------------------
# bound propagation

def _boundary_structure(bn: BayesianNetwork, x: int, e: Evidence, k: int):
    """Cached per-(variable, evidence): boundary, config columns, coefficients."""
    key = ("bdp-var", x, tuple(sorted(e.items())), k)
    hit = bn._cache.get(key)
    if hit is not None:
        return hit
    keep = relevant_keep_set(bn, x, e)
    parents = bn.parents(x)
    kids = tuple(c for c in bn.children[x] if c in keep)
    boundary: set[int] = set(parents)
    for c in kids:
        boundary.add(c)
        boundary.update(bn.parents(c))
    boundary.discard(x)
    domain = math.prod(bn.cards[v] for v in boundary) if boundary else 1
    if domain > k:
        out = {"skip": True}
        bn._cache[key] = out
        return out

    unobs = tuple(sorted(v for v in boundary if v not in e))
    n_configs = math.prod(bn.cards[v] for v in unobs) if unobs else 1
    cols: dict[int, np.ndarray] = {}
    suffix = n_configs
    base = np.arange(n_configs, dtype=np.int64)
    for v in unobs:
        suffix //= bn.cards[v]
        cols[v] = (base // suffix) % bn.cards[v]

    card_x = bn.cards[x]

    def value_of(v):
        # returns an array broadcastable over (configs, x values)
        if v == x:
            return np.arange(card_x, dtype=np.int64)[None, :]
        if v in e:
            return np.full((1, 1), e[v], dtype=np.int64)
        return cols[v][:, None]

    scores = np.ones((n_configs, card_x))
    for fam in (x,) + kids:
        cpt = bn.cpts[fam]
        strides = {}
        acc = 1
        scope = cpt.parents + (cpt.child,)
        for v in reversed(scope):
            strides[v] = acc
            acc *= bn.cards[v]
        idx = np.zeros((1, 1), dtype=np.int64)
        for v in scope:
            idx = idx + strides[v] * value_of(v)
        scores = scores * cpt.table.reshape(-1)[idx]
    denom = scores.sum(axis=1)
    coeffs = np.divide(
        scores, denom[:, None], out=np.zeros_like(scores), where=denom[:, None] > 0.0
    )
    out = {
        "skip": False,
        "unobs": unobs,
        "cols": cols,
        "coeffs": coeffs,
    }
    bn._cache[key] = out
    return out


def propagate_marginal_bounds(
    bn: BayesianNetwork,
    e: Evidence,
    k: int = DEFAULT_K,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    exact_lp: bool = False,
) -> MarginalBounds:
    """Iterative marginal bounding by per-variable boundary LPs.

    Every unobserved variable starts at [0, 1]; sweeps in topological order
    re-solve each variable's LP against the current intervals of its Markov
    boundary (restricted to the variable's relevant subnetwork) and intersect,
    so intervals never widen. Variables whose full boundary domain exceeds
    ``k`` are skipped and keep [0, 1]. Observed variables are pinned to their
    indicator. ``exact_lp`` swaps the greedy relaxation for the exact solver
    (test oracle; infeasible LPs fall back to the coefficient extremes).
    """
    lows: dict[int, np.ndarray] = {}
    highs: dict[int, np.ndarray] = {}
    skipped = set()
    for v in range(bn.n):
        if v in e:
            lo = np.zeros(bn.cards[v])
            lo[e[v]] = 1.0
            lows[v] = lo
            highs[v] = lo.copy()
        else:
            lows[v] = np.zeros(bn.cards[v])
            highs[v] = np.ones(bn.cards[v])

    sweep_vars = [v for v in bn.topo_order if v not in e]
    structures = {v: _boundary_structure(bn, v, e, k) for v in sweep_vars}
    skipped = {v for v in sweep_vars if structures[v]["skip"]}

    solve = solve_blanket_lp_exact if exact_lp else solve_blanket_lp_greedy
    iters = 0
    for _ in range(max(1, max_iters)):
        iters += 1
        delta = 0.0
        for v in sweep_vars:
            st = structures[v]
            if st["skip"]:
                continue
            members = tuple(
                (u, st["cols"][u], lows[u], highs[u]) for u in st["unobs"]
            )
            for val in range(bn.cards[v]):
                lp = BlanketLp(query=(v, val), coeffs=st["coeffs"][:, val], members=members)
                try:
                    lo = solve(lp, "min")
                    hi = solve(lp, "max")
                except BlanketLpInfeasible:
                    lo, hi = 0.0, 1.0
                new_lo = min(max(lows[v][val], lo), highs[v][val])
                new_hi = max(min(highs[v][val], hi), lows[v][val])
                delta = max(delta, new_lo - lows[v][val], highs[v][val] - new_hi)
                lows[v][val] = new_lo
                highs[v][val] = new_hi
        if delta <= tol:
            break
    return MarginalBounds(lows=lows, highs=highs, iterations=iters, skipped=frozenset(skipped))


# ---------------------------------------------------------------------------
# joint-probability bounds

def _as_pairs(a) -> PartialAssignment:
    if a is None:
        return ()
    if isinstance(a, dict):
        return tuple(a.items())
    return tuple(a)


def prior_mass_bounds(
    bn: BayesianNetwork, e: Evidence, a: PartialAssignment | dict, extra=None
) -> tuple[float, float]:
    """[0, P(a ∪ extra)]: prior mass computed exactly with no evidence."""
    merged, conflict = merge_assignment({}, _as_pairs(a), extra)
    if conflict:
        return 0.0, 0.0
    prior = float(eliminate(bn, merged, ()))
    return 0.0, min(1.0, prior)


def chain_joint_bounds(
    bn: BayesianNetwork,
    e: Evidence,
    a: PartialAssignment | dict,
    extra=None,
    k: int = DEFAULT_K,
    iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    order: tuple[int, ...] | None = None,
) -> tuple[float, float]:
    """Bound P(a ∪ extra, e) by the evidence-chain factorization.

    Evidence conditionals are taken in topological order (earlier factors see
    smaller relevant subnetworks); any ``order`` yields a sound interval, so
    the parameter exists for experiments. Each factor's interval comes from
    bound propagation on the network conditioned on everything to its left.
    The result is intersected with the prior-mass interval, so it degrades to
    that bound instead of ever being worse.
    """
    merged, conflict = merge_assignment({}, _as_pairs(a), extra)
    if conflict:
        return 0.0, 0.0
    for var, val in merged.items():
        if var in e and e[var] != val:
            return 0.0, 0.0
    prior = float(eliminate(bn, merged, ()))
    bf_hi = min(1.0, prior)
    if order is None:
        order = tuple(v for v in bn.topo_order if v in e)
    elif set(order) != set(e):
        raise ValueError("order must be a permutation of the evidence variables")
    lo_prod, hi_prod = 1.0, 1.0
    ctx = dict(merged)
    for ev_var in (v for v in order if v not in merged):
        mb = propagate_marginal_bounds(bn, ctx, k=k, max_iters=iters, tol=tol)
        l, u = mb.interval(ev_var, e[ev_var])
        lo_prod *= max(0.0, l)
        hi_prod *= min(1.0, u)
        ctx[ev_var] = e[ev_var]
        if hi_prod == 0.0:
            break
    lo = max(0.0, lo_prod * prior)
    hi = min(bf_hi, hi_prod * prior)
    return min(lo, hi), hi


# ---------------------------------------------------------------------------
# engine plug-ins

@dataclass
class PartialTupleBounds:
    """Batched bounder output for one partial tuple.

    ``var_low[v][x]``/``var_high[v][x]`` bound P(x, partial, e) for every
    still-free variable v; ``joint`` bounds P(partial, e); ``prior`` is the
    exact prior mass of the partial and ``var_prior[v]`` the exact prior of
    each one-variable cutset extension (closed forms and the factored
    extension mode read these).
    """

    prior: float
    joint: tuple[float, float]
    var_low: dict[int, np.ndarray]
    var_high: dict[int, np.ndarray]
    var_prior: dict[int, np.ndarray]
    cost: int


class JointBounder:
    """Contract: sound [L, U] on joints of partial assignments with evidence."""

    name = "?"
    supports_arbitrary_assignments = True

    def __init__(self, bn: BayesianNetwork, e: Evidence, cutset_vars: tuple[int, ...]):
        self.bn = bn
        self.e = dict(e)
        self.cutset_vars = tuple(cutset_vars)
        self.invocations = 0
        self._memo: dict = {}
        self._lock = threading.Lock()

    def _free_vars(self, assigned: dict) -> list[int]:
        return [
            v for v in range(self.bn.n) if v not in self.e and v not in assigned
        ]

    def _extension_priors(self, partial: dict, var: int) -> np.ndarray:
        return np.asarray(eliminate(self.bn, partial, (var,)), dtype=np.float64)

    def joint_bounds(self, a, extra=None) -> tuple[float, float]:
        raise NotImplementedError

    def tuple_tables(self, partial: PartialAssignment) -> PartialTupleBounds:
        """Memoized batched tables; safe under concurrent callers (distinct
        partials run in parallel, each is computed and counted once)."""
        key = tuple(partial)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = self._tables(dict(partial))
        with self._lock:
            hit = self._memo.get(key)
            if hit is None:
                self._memo[key] = out
                self.invocations += out.cost
                hit = out
        return hit

    def _tables(self, partial: dict) -> PartialTupleBounds:
        raise NotImplementedError


class PriorMassBounder(JointBounder):
    name = "bf"

    def joint_bounds(self, a, extra=None):
        return prior_mass_bounds(self.bn, self.e, a, extra)

    def _tables(self, partial: dict) -> PartialTupleBounds:
        prior = float(eliminate(self.bn, partial, ()))
        var_low: dict[int, np.ndarray] = {}
        var_high: dict[int, np.ndarray] = {}
        var_prior: dict[int, np.ndarray] = {}
        cset = set(self.cutset_vars)
        for v in self._free_vars(partial):
            card = self.bn.cards[v]
            var_low[v] = np.zeros(card)
            if v in cset:
                # extension priors: exact prior of (partial + {v=value})
                var_prior[v] = self._extension_priors(partial, v)
                var_high[v] = np.minimum(var_prior[v], 1.0)
            else:
                # value-independent prior mass of the tuple itself
                var_high[v] = np.full(card, min(prior, 1.0))
        return PartialTupleBounds(
            prior=prior,
            joint=(0.0, min(prior, 1.0)),
            var_low=var_low,
            var_high=var_high,
            var_prior=var_prior,
            cost=1,
        )


class ChainPropagationBounder(JointBounder):
    name = "abdp"

    def __init__(
        self,
        bn: BayesianNetwork,
        e: Evidence,
        cutset_vars: tuple[int, ...],
        k: int = DEFAULT_K,
        iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
    ):
        super().__init__(bn, e, cutset_vars)
        self.k = k
        self.iters = iters
        self.tol = tol

    def joint_bounds(self, a, extra=None):
        return chain_joint_bounds(
            self.bn, self.e, a, extra, k=self.k, iters=self.iters, tol=self.tol
        )

    def _tables(self, partial: dict) -> PartialTupleBounds:
        prior = float(eliminate(self.bn, partial, ()))
        cset = set(self.cutset_vars)
        free = self._free_vars(partial)
        var_prior = {
            v: self._extension_priors(partial, v) for v in free if v in cset
        }
        if prior == 0.0:
            zeros = {v: np.zeros(self.bn.cards[v]) for v in free}
            return PartialTupleBounds(
                prior=0.0,
                joint=(0.0, 0.0),
                var_low=zeros,
                var_high={v: z.copy() for v, z in zeros.items()},
                var_prior=var_prior,
                cost=0,
            )
        jl, jh = chain_joint_bounds(
            self.bn, self.e, partial, k=self.k, iters=self.iters, tol=self.tol
        )
        cond = dict(self.e)
        cond.update(partial)
        mb = propagate_marginal_bounds(
            self.bn, cond, k=self.k, max_iters=self.iters, tol=self.tol
        )
        var_low: dict[int, np.ndarray] = {}
        var_high: dict[int, np.ndarray] = {}
        for v in free:
            lo = mb.lows[v] * jl
            hi = mb.highs[v] * jh
            if v in cset:
                hi = np.minimum(hi, var_prior[v])
            else:
                hi = np.minimum(hi, prior)
            var_low[v] = np.minimum(lo, hi)
            var_high[v] = hi
        return PartialTupleBounds(
            prior=prior,
            joint=(jl, jh),
            var_low=var_low,
            var_high=var_high,
            var_prior=var_prior,
            cost=2,
        )


def make_bounder(
    kind: str,
    bn: BayesianNetwork,
    e: Evidence,
    cutset_vars: tuple[int, ...],
    k: int = DEFAULT_K,
    iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> JointBounder:
    if kind == "bf":
        return PriorMassBounder(bn, e, cutset_vars)
    if kind == "abdp":
        return ChainPropagationBounder(bn, e, cutset_vars, k=k, iters=iters, tol=tol)
    raise ValueError(f"unknown bounder kind {kind!r} (expected 'bf' or 'abdp')")
