"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from beliefbounds.bounder import BlanketLp, JointBounder, PartialTupleBounds
from beliefbounds.exact import eliminate, enumerate_oracle
from beliefbounds.graphs import find_loop_cutset
from beliefbounds.model import BayesianNetwork, Cpt, Variable
from beliefbounds.tuples import select_tuples_gibbs


# ---------------------------------------------------------------------------
# network generation

def random_network(
    rng: np.random.Generator,
    n: int | None = None,
    max_card: int = 3,
    extra_edge_prob: float = 0.35,
    max_parents: int = 3,
    zero_rows: bool = False,
) -> BayesianNetwork:
    """Random DAG over a random topological order with random CPTs.

    Nodes are wired along a shuffled order (each non-first node gets at least
    one parent with high probability, plus extras), which produces plenty of
    undirected loops. ``zero_rows`` occasionally plants hard zeros so zero
    prior masses get exercised.
    """
    if n is None:
        n = int(rng.integers(4, 13))
    order = rng.permutation(n)
    parents_of: dict[int, tuple[int, ...]] = {}
    for pos, node in enumerate(order):
        cands = order[:pos]
        chosen: list[int] = []
        if pos and rng.random() < 0.9:
            chosen.append(int(rng.choice(cands)))
        for c in cands:
            if len(chosen) >= max_parents:
                break
            if c not in chosen and rng.random() < extra_edge_prob / max(pos, 1):
                chosen.append(int(c))
        parents_of[int(node)] = tuple(sorted(chosen))
    cards = tuple(int(rng.integers(2, max_card + 1)) for _ in range(n))
    variables = tuple(Variable(i, f"v{i}", cards[i]) for i in range(n))
    cpts = []
    for i in range(n):
        ps = parents_of[i]
        shape = tuple(cards[p] for p in ps) + (cards[i],)
        table = rng.random(shape) + 0.02
        if zero_rows and rng.random() < 0.3:
            flat = table.reshape(-1, cards[i])
            row = int(rng.integers(flat.shape[0]))
            col = int(rng.integers(cards[i]))
            flat[row] = 0.0
            flat[row, col] = 1.0
        table = table / table.sum(axis=-1, keepdims=True)
        cpts.append(Cpt(child=i, parents=ps, table=table))
    return BayesianNetwork(variables=variables, cpts=tuple(cpts))


def random_tree_network(rng: np.random.Generator, n: int, max_card: int = 3):
    """Directed tree: every non-root has exactly one parent among earlier ids."""
    cards = tuple(int(rng.integers(2, max_card + 1)) for _ in range(n))
    variables = tuple(Variable(i, f"v{i}", cards[i]) for i in range(n))
    cpts = []
    for i in range(n):
        ps = (int(rng.integers(0, i)),) if i else ()
        shape = tuple(cards[p] for p in ps) + (cards[i],)
        table = rng.random(shape) + 0.05
        table = table / table.sum(axis=-1, keepdims=True)
        cpts.append(Cpt(child=i, parents=ps, table=table))
    return BayesianNetwork(variables=variables, cpts=tuple(cpts))


def random_evidence(
    rng: np.random.Generator, bn: BayesianNetwork, max_obs: int = 2
) -> dict[int, int]:
    size = int(rng.integers(0, max_obs + 1))
    if size == 0:
        return {}
    chosen = rng.choice(bn.n, size=min(size, bn.n), replace=False)
    return {int(v): int(rng.integers(bn.cards[v])) for v in chosen}


def network_text(bn: BayesianNetwork) -> str:
    """Render a network back to the UAI text grammar."""
    lines = ["BAYES", str(bn.n), " ".join(str(c) for c in bn.cards), str(bn.n)]
    for cpt in bn.cpts:
        scope = cpt.parents + (cpt.child,)
        lines.append(f"{len(scope)} " + " ".join(str(v) for v in scope))
    for cpt in bn.cpts:
        flat = np.asarray(cpt.table).reshape(-1)
        lines.append(str(flat.size))
        lines.append(" ".join(format(x, ".17g") for x in flat))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# independent probability oracles (no shared code with the package internals)

def brute_joint(bn: BayesianNetwork, assign: dict[int, int]) -> float:
    p = 1.0
    for cpt in bn.cpts:
        idx = tuple(assign[q] for q in cpt.parents) + (assign[cpt.child],)
        p *= float(np.asarray(cpt.table)[idx])
    return p


def brute_event_mass(bn: BayesianNetwork, fixed: dict[int, int]) -> float:
    """Σ over completions of the joint: independent reference for P(fixed)."""
    free = [v for v in range(bn.n) if v not in fixed]
    total = []
    for vals in itertools.product(*(range(bn.cards[v]) for v in free)):
        assign = dict(fixed)
        assign.update(zip(free, vals))
        total.append(brute_joint(bn, assign))
    return math.fsum(total)


def brute_posteriors(bn: BayesianNetwork, e: dict[int, int]):
    """(P(e), {var: posterior array}) by full enumeration, fsum-accumulated."""
    masses = {
        v: [[] for _ in range(bn.cards[v])] for v in range(bn.n)
    }
    terms = []
    for vals in itertools.product(*(range(c) for c in bn.cards)):
        assign = dict(enumerate(vals))
        if any(assign[v] != x for v, x in e.items()):
            continue
        p = brute_joint(bn, assign)
        terms.append(p)
        for v in range(bn.n):
            masses[v][assign[v]].append(p)
    pe = math.fsum(terms)
    tables = {
        v: np.array([math.fsum(cell) for cell in masses[v]]) / pe if pe > 0 else None
        for v in range(bn.n)
    }
    return pe, tables


# ---------------------------------------------------------------------------
# LP instance generation and basis-enumeration oracle

def random_lp(
    rng: np.random.Generator,
    n_members: int | None = None,
    max_card: int = 4,
    point: bool = False,
    cards: list[int] | None = None,
) -> BlanketLp:
    """Feasible random instance: constraints are relaxations of the group
    marginals of a hidden distribution, so the truth is always inside."""
    if cards is None:
        if n_members is None:
            n_members = int(rng.integers(1, 4))
        cards = [int(rng.integers(2, max_card + 1)) for _ in range(n_members)]
    n = int(np.prod(cards))
    coeffs = rng.random(n)
    q = rng.random(n) + 1e-3
    q /= q.sum()
    cols = []
    suffix = n
    base = np.arange(n)
    for c in cards:
        suffix //= c
        cols.append((base // suffix) % c)
    members = []
    for idx, c in enumerate(cards):
        col = cols[idx]
        marg = np.array([q[col == v].sum() for v in range(c)])
        if point:
            lows = marg.copy()
            highs = marg.copy()
        else:
            lows = np.clip(marg - rng.random(c) * 0.3, 0.0, 1.0)
            highs = np.clip(marg + rng.random(c) * 0.3, 0.0, 1.0)
        members.append((idx, col, lows, highs))
    return BlanketLp(query=(0, 0), coeffs=coeffs, members=tuple(members))


def lp_basis_enumeration(lp: BlanketLp, sense: str) -> float:
    """Exact optimum by enumerating basic solutions of the standard form.

    Constraints become A z = b with slacks; every square basis is solved and
    feasible basic solutions are scored. Only usable for tiny instances.
    """
    n = lp.coeffs.shape[0]
    rows = [np.ones(n)]
    rhs = [1.0]
    senses = []  # +1: <=, -1: >=
    for _var, col, lows, highs in lp.members:
        for v in range(len(lows)):
            ind = (col == v).astype(float)
            rows.append(ind)
            rhs.append(float(highs[v]))
            senses.append(1)
            rows.append(ind)
            rhs.append(float(lows[v]))
            senses.append(-1)
    m_ineq = len(senses)
    a = np.zeros((1 + m_ineq, n + m_ineq))
    a[0, :n] = rows[0]
    for i in range(m_ineq):
        a[1 + i, :n] = rows[1 + i]
        a[1 + i, n + i] = 1.0 if senses[i] == 1 else -1.0
    b = np.array(rhs)
    n_all = n + m_ineq
    m_rows = 1 + m_ineq
    best = None
    for basis in itertools.combinations(range(n_all), m_rows):
        sub = a[:, basis]
        try:
            z = np.linalg.solve(sub, b)
        except np.linalg.LinAlgError:
            continue
        if np.any(z < -1e-9):
            continue
        full = np.zeros(n_all)
        full[list(basis)] = z
        val = float(lp.coeffs @ full[:n])
        if best is None:
            best = val
        elif sense == "max":
            best = max(best, val)
        else:
            best = min(best, val)
    if best is None:
        raise ValueError("infeasible LP")
    return best


# ---------------------------------------------------------------------------
# exact plug-in double for assembly arithmetic tests

class ExactBounder(JointBounder):
    """Plug-in returning exact values as point intervals (arithmetic oracle)."""

    name = "exact"

    def joint_bounds(self, a, extra=None):
        merged = dict(self.e)
        items = list(dict(a or {}).items())
        if extra is not None:
            items.append(tuple(extra))
        for var, val in items:
            if var in merged and merged[var] != val:
                return 0.0, 0.0
            merged[var] = val
        mass = brute_event_mass(self.bn, merged)
        return mass, mass

    def _tables(self, partial):
        assigned = dict(self.e)
        assigned.update(partial)
        prior = brute_event_mass(self.bn, partial) if partial else 1.0
        mass = brute_event_mass(self.bn, assigned)
        var_low, var_high, var_prior = {}, {}, {}
        cset = set(self.cutset_vars)
        for v in self._free_vars(partial):
            card = self.bn.cards[v]
            exact = np.array(
                [brute_event_mass(self.bn, {**assigned, v: x}) for x in range(card)]
            )
            var_low[v] = exact
            var_high[v] = exact.copy()
            if v in cset:
                var_prior[v] = np.array(
                    [brute_event_mass(self.bn, {**partial, v: x}) for x in range(card)]
                )
        return PartialTupleBounds(
            prior=prior,
            joint=(mass, mass),
            var_low=var_low,
            var_high=var_high,
            var_prior=var_prior,
            cost=1,
        )


# ---------------------------------------------------------------------------
# the randomized acceptance suite, built once per session

class SuiteCase:
    __slots__ = ("bn", "e", "cutset", "m", "pe", "posteriors", "active_full")

    def __init__(self, bn, e, cutset, pe, posteriors, active_full):
        self.bn = bn
        self.e = e
        self.cutset = cutset
        self.m = cutset.n_tuples
        self.pe = pe
        self.posteriors = posteriors
        self.active_full = active_full


def _build_suite(count: int = 200, seed: int = 20240817) -> list[SuiteCase]:
    rng = np.random.default_rng(seed)
    cases: list[SuiteCase] = []
    attempts = 0
    while len(cases) < count:
        attempts += 1
        if attempts > count * 60:
            raise RuntimeError("suite generation stalled")
        bn = random_network(rng, zero_rows=attempts % 7 == 0)
        e = random_evidence(rng, bn)
        cutset = find_loop_cutset(bn, exclude=frozenset(e)).with_cards(bn)
        m = cutset.n_tuples
        cap = 40 if len(cases) % 10 == 0 else 18
        if not cutset.vars or m > cap:
            continue
        pe, tables = enumerate_oracle(bn, e)
        if pe <= 1e-9:
            continue
        active_full = select_tuples_gibbs(bn, e, cutset, m)
        cases.append(SuiteCase(bn, e, cutset, pe, tables, active_full))
    return cases


_SUITE_CACHE: list[SuiteCase] | None = None


@pytest.fixture(scope="session")
def acceptance_suite() -> list[SuiteCase]:
    global _SUITE_CACHE
    if _SUITE_CACHE is None:
        _SUITE_CACHE = _build_suite()
    return _SUITE_CACHE


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
