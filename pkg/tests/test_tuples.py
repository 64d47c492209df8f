"""Active tuple selection and the truncated search tree."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefbounds.graphs import Cutset, find_loop_cutset
from beliefbounds.model import BayesianNetwork, Cpt, Variable, assignment_tuples
from beliefbounds.tuples import (
    ActiveTupleSet,
    build_truncated_tree,
    partition_check,
    select_tuples_gibbs,
)

from conftest import (
    brute_event_mass,
    random_evidence,
    random_network,
)


def _worked_cutset():
    return Cutset(vars=(0, 1, 2, 3), cards=(2, 3, 2, 2))


def _tree_for(active_tuples, cards=(2, 3, 2, 2)):
    c = Cutset(vars=tuple(range(len(cards))), cards=cards)
    active = ActiveTupleSet(
        cutset=c,
        tuples=tuple(active_tuples),
        pe=np.zeros(len(active_tuples)),
    )
    return build_truncated_tree(c, active)


class TestTruncatedTree:
    def test_worked_example(self):
        # four active tuples in a (2,3,2,2) space of M = 24
        tree = _tree_for([(0, 1, 0, 0), (0, 1, 0, 1), (0, 2, 1, 0), (0, 2, 1, 1)])
        assert tree.cutset.n_tuples == 24
        assert tree.partials == (
            (0, 0),
            (0, 1, 1),
            (0, 2, 0),
            (1,),
        )
        assert tree.m_prime == 4
        # processed work: h exact tuples + m' bounded partials
        assert tree.active.h + tree.m_prime == 8

    def test_empty_active_set_covers_everything(self):
        tree = _tree_for([])
        assert tree.partials == ((),)
        assert tree.m_prime == 1

    def test_saturated_active_set_leaves_nothing(self):
        cards = (2, 2)
        tree = _tree_for(list(assignment_tuples(cards)), cards=cards)
        assert tree.partials == ()

    def test_partial_count_bound(self):
        # m' <= h * (d_max - 1) * |C| for any nonempty active set
        cards = (3, 3, 2)
        pool = list(assignment_tuples(cards))
        rng = np.random.default_rng(5)
        for h in range(1, len(pool) + 1):
            pick = [pool[i] for i in rng.choice(len(pool), size=h, replace=False)]
            tree = _tree_for(pick, cards=cards)
            assert tree.m_prime <= h * (max(cards) - 1) * len(cards)

    @staticmethod
    def _covers_once(tree, cards):
        prefixes = set(tree.partials)
        actives = set(tree.active.tuples)
        for full in itertools.product(*(range(c) for c in cards)):
            homes = int(full in actives)
            homes += sum(
                1 for p in prefixes if full[: len(p)] == p
            )
            assert homes == 1, f"{full} covered {homes} times"

    def test_partition_property_examples(self):
        cards = (2, 3, 2, 2)
        tree = _tree_for([(0, 1, 0, 0), (0, 1, 0, 1), (0, 2, 1, 0), (0, 2, 1, 1)])
        self._covers_once(tree, cards)

    @settings(max_examples=120, deadline=None)
    @given(data=st.data())
    def test_partition_property_random(self, data):
        cards = tuple(
            data.draw(
                st.lists(st.integers(2, 3), min_size=1, max_size=4), label="cards"
            )
        )
        pool = list(itertools.product(*(range(c) for c in cards)))
        k = data.draw(st.integers(0, min(len(pool), 6)), label="h")
        idx = data.draw(
            st.lists(
                st.integers(0, len(pool) - 1), min_size=k, max_size=k, unique=True
            ),
            label="which",
        )
        tree = _tree_for([pool[i] for i in idx], cards=cards)
        self._covers_once(tree, cards)
        # every partial is a strict prefix assignment, never a full tuple,
        # except when it IS the whole-space sentinel for an empty active set
        for p in tree.partials:
            if tree.active.h:
                assert 0 < len(p) <= len(cards)

    def test_missing_cards_rejected(self):
        c = Cutset(vars=(0, 1))
        active = ActiveTupleSet(cutset=c, tuples=(), pe=np.zeros(0))
        with pytest.raises(ValueError, match="cardinalities"):
            build_truncated_tree(c, active)


class TestExhaustiveSelection:
    def test_true_top_h_with_lexicographic_ties(self, rng):
        for _ in range(20):
            bn = random_network(rng, n=6)
            e = random_evidence(rng, bn)
            cut = find_loop_cutset(bn, exclude=frozenset(e)).with_cards(bn)
            if not cut.vars or cut.n_tuples > 64:
                continue
            m = cut.n_tuples
            h = int(rng.integers(0, m + 1))
            active = select_tuples_gibbs(bn, e, cut, h)
            # independent ranking by enumeration
            scored = [
                (tup, brute_event_mass(bn, {**e, **dict(zip(cut.vars, tup))}))
                for tup in assignment_tuples(cut.cards)
            ]
            scored.sort(key=lambda kv: (-kv[1], kv[0]))
            assert active.tuples == tuple(t for t, _ in scored[:h])
            for (tup, want), got in zip(scored[:h], active.pe):
                assert got == pytest.approx(want, abs=1e-12)

    def test_nested_prefixes(self, rng):
        while True:
            bn = random_network(rng, n=6)
            e = random_evidence(rng, bn)
            cut = find_loop_cutset(bn, exclude=frozenset(e)).with_cards(bn)
            if cut.vars and cut.n_tuples <= 32:
                break
        m = cut.n_tuples
        full = select_tuples_gibbs(bn, e, cut, m)
        for h in range(m + 1):
            again = select_tuples_gibbs(bn, e, cut, h)
            assert again.tuples == full.prefix(h).tuples

    def test_h_out_of_range(self, rng):
        bn = random_network(rng, n=5)
        cut = find_loop_cutset(bn).with_cards(bn)
        with pytest.raises(ValueError, match="exceeds"):
            select_tuples_gibbs(bn, {}, cut, cut.n_tuples + 1)
        with pytest.raises(ValueError, match=">= 0"):
            select_tuples_gibbs(bn, {}, cut, -1)


class TestGibbsSelection:
    def _loopy_net(self, rng):
        while True:
            bn = random_network(rng, n=8, max_card=3)
            cut = find_loop_cutset(bn).with_cards(bn)
            if cut.size >= 2 and cut.n_tuples <= 200:
                return bn, cut

    def test_sampler_path_properties(self, rng):
        bn, cut = self._loopy_net(rng)
        h = min(6, cut.n_tuples)
        # cap=0 forces the sampling path even though M is small
        a1 = select_tuples_gibbs(bn, {}, cut, h, sweeps=4, seed=11, cap=0)
        a2 = select_tuples_gibbs(bn, {}, cut, h, sweeps=4, seed=11, cap=0)
        assert a1.tuples == a2.tuples  # seeded determinism
        assert len(set(a1.tuples)) == h  # distinct
        for tup, p in zip(a1.tuples, a1.pe):
            want = brute_event_mass(bn, dict(zip(cut.vars, tup)))
            assert p == pytest.approx(want, abs=1e-12)  # masses are exact

    def test_padding_reaches_h_without_sweeps(self, rng):
        bn, cut = self._loopy_net(rng)
        h = min(8, cut.n_tuples)
        active = select_tuples_gibbs(bn, {}, cut, h, sweeps=0, seed=3, cap=0)
        assert active.h == h
        assert len(set(active.tuples)) == h

    def test_tree_build_works_on_sampled_sets(self, rng):
        bn, cut = self._loopy_net(rng)
        h = min(5, cut.n_tuples)
        active = select_tuples_gibbs(bn, {}, cut, h, sweeps=3, seed=1, cap=0)
        tree = build_truncated_tree(cut, active)
        TestTruncatedTree._covers_once(tree, cut.cards)


class TestPartitionCheck:
    def test_masses_sum_to_event_probability(self, rng):
        for _ in range(12):
            bn = random_network(rng, n=7)
            e = random_evidence(rng, bn)
            cut = find_loop_cutset(bn, exclude=frozenset(e)).with_cards(bn)
            if not cut.vars or cut.n_tuples > 64:
                continue
            pe = brute_event_mass(bn, e)
            for h in (0, min(3, cut.n_tuples), cut.n_tuples):
                active = select_tuples_gibbs(bn, e, cut, h)
                tree = build_truncated_tree(cut, active)
                s, r = partition_check(bn, e, tree)
                assert s + r == pytest.approx(pe, abs=1e-9)
                assert s == pytest.approx(math.fsum(active.pe), abs=1e-12)

    def test_refuses_oversized_spaces(self, rng):
        while True:
            bn = random_network(rng, n=6)
            cut = find_loop_cutset(bn).with_cards(bn)
            if cut.vars:
                break
        active = select_tuples_gibbs(bn, {}, cut, 0)
        tree = build_truncated_tree(cut, active)
        with pytest.raises(ValueError, match="too large"):
            partition_check(bn, {}, tree, max_terms=0)


class TestPrefixViews:
    def test_prefix_slices_every_cache(self, rng):
        while True:
            bn = random_network(rng, n=6)
            cut = find_loop_cutset(bn).with_cards(bn)
            if cut.vars and cut.n_tuples <= 64:
                break
        m = cut.n_tuples
        active = select_tuples_gibbs(bn, {}, cut, m)
        active.priors = np.arange(m, dtype=np.float64)
        active.x_tables = {9: np.arange(2 * m, dtype=np.float64).reshape(m, 2)}
        view = active.prefix(2)
        assert view.tuples == active.tuples[:2]
        np.testing.assert_array_equal(view.pe, active.pe[:2])
        np.testing.assert_array_equal(view.priors, [0.0, 1.0])
        assert view.x_tables[9].shape == (2, 2)
        with pytest.raises(ValueError, match="prefix"):
            active.prefix(m + 1)
