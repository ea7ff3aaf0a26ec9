import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxymcts.tree import AllTerminal, EmptyTree, SearchTree, TreeConfig, UnknownNode, uct

PLAIN = TreeConfig(c_explore=1.0, widen_c=None)


def chain(tree, depth):
    cur = tree.root
    ids = [cur]
    for _ in range(depth):
        cur = tree.add_child(cur).id
        ids.append(cur)
    return ids


# -- uct ---------------------------------------------------------------------

def test_uct_closed_form():
    assert uct(3.0, 2, 10, 1.0) == pytest.approx(1.5 + math.sqrt(math.log(10) / 2), abs=1e-12)
    assert uct(3.0, 2, 10, 1.0) == pytest.approx(2.5730, abs=1e-4)


def test_uct_single_visit_parent_has_no_bonus():
    assert uct(0.0, 1, 1, 1.0) == 0.0


def test_uct_zero_exploration():
    assert uct(5.0, 5, 5, 0.0) == 1.0


@given(
    q=st.floats(0, 50), n=st.integers(1, 100), extra=st.integers(1, 1000),
    c=st.floats(0.01, 5), dq=st.floats(0.01, 5), dc=st.floats(0.01, 5),
)
def test_uct_monotone(q, n, extra, c, dq, dc):
    n_parent = n + extra
    base = uct(q, n, n_parent, c)
    assert uct(q + dq, n, n_parent, c) > base
    assert uct(q, n, n_parent, c + dc) > base
    assert uct(q, n + 1, n_parent, c) < base


# -- select ------------------------------------------------------------------

def test_select_leaf_root():
    t = SearchTree()
    assert t.select(PLAIN) == t.root


def test_select_prefers_unvisited():
    t = SearchTree()
    a = t.add_child(t.root)
    b = t.add_child(t.root)
    b.n, b.q = 3, 3.0
    t.get(t.root).n = 3
    assert t.select(PLAIN) == a.id


def test_select_unvisited_ties_to_lowest_id():
    t = SearchTree()
    kids = [t.add_child(t.root) for _ in range(3)]
    kids[0].n = 1
    assert t.select(PLAIN) == kids[1].id


def test_select_descends_by_uct():
    t = SearchTree()
    root = t.get(t.root)
    root.n = 10
    a = t.add_child(t.root)
    a.q, a.n = 3.0, 2
    b = t.add_child(t.root)
    b.q, b.n = 2.0, 1
    assert uct(a.q, a.n, 10, 1.0) == pytest.approx(2.573, abs=1e-3)
    assert uct(b.q, b.n, 10, 1.0) == pytest.approx(3.517, abs=1e-3)
    # B is a leaf, so descending into it ends the walk there
    assert t.select(PLAIN) == b.id


def test_select_ties_go_to_lower_id():
    t = SearchTree()
    t.get(t.root).n = 4
    a = t.add_child(t.root)
    b = t.add_child(t.root)
    a.q = b.q = 1.0
    a.n = b.n = 2
    assert t.select(PLAIN) == a.id


def test_select_skips_terminal_children():
    t = SearchTree()
    t.get(t.root).n = 4
    a = t.add_child(t.root)
    b = t.add_child(t.root)
    a.q, a.n, a.terminal = 10.0, 2, True
    b.q, b.n = 0.0, 2
    assert t.select(PLAIN) == b.id


def test_select_expands_node_whose_children_are_all_terminal():
    t = SearchTree()
    t.get(t.root).n = 2
    a = t.add_child(t.root)
    a.n, a.terminal = 1, True
    assert t.select(PLAIN) == t.root


def test_select_terminal_root_raises():
    t = SearchTree()
    t.get(t.root).terminal = True
    with pytest.raises(AllTerminal):
        t.select(PLAIN)


def test_progressive_widening_limits_children():
    cfg = TreeConfig(c_explore=1.0, widen_c=1.0, widen_alpha=0.5)
    t = SearchTree()
    a = t.add_child(t.root)
    a.n, a.q = 4, 4.0
    t.get(t.root).n = 4
    # ceil(sqrt(4)) = 2 children allowed, one present: expand the root
    assert t.select(cfg) == t.root
    b = t.add_child(t.root)
    b.n, b.q = 1, 0.0
    t.get(t.root).n = 5
    # ceil(sqrt(5)) = 3, still room
    assert t.select(cfg) == t.root
    t.add_child(t.root).n = 1
    t.get(t.root).n = 6
    # three children at the limit of ceil(sqrt(6)) = 3: descend
    assert t.select(cfg) != t.root


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 30), st.floats(-1, 3), st.booleans()), min_size=1, max_size=60))
def test_select_never_returns_terminal(ops):
    t = SearchTree()
    for parent_pick, reward, term in ops:
        ids = list(t.nodes)
        parent = ids[parent_pick % len(ids)]
        child = t.add_child(parent)
        t.backpropagate(child.id, reward)
        if term:
            child.terminal = True
    for cfg in (PLAIN, TreeConfig()):
        v = t.select(cfg)
        assert not t.get(v).terminal
        # the walk never passes through a terminal node
        assert not any(t.get(u).terminal for u in t.path_to_root(v))


# -- backpropagate -----------------------------------------------------------

def test_backprop_single_node():
    t = SearchTree()
    t.backpropagate(t.root, 2.0)
    r = t.get(t.root)
    assert (r.q, r.n) == (2.0, 1)


def test_backprop_chain():
    t = SearchTree()
    ids = chain(t, 2)
    t.backpropagate(ids[-1], -1.0)
    for v in ids:
        assert (t.get(v).q, t.get(v).n) == (-1.0, 1)


def test_backprop_twice_same_leaf():
    t = SearchTree()
    leaf = chain(t, 1)[-1]
    t.backpropagate(leaf, 1.0)
    t.backpropagate(leaf, 2.0)
    assert (t.get(leaf).q, t.get(leaf).n) == (3.0, 2)


def test_backprop_unknown():
    with pytest.raises(UnknownNode):
        SearchTree().backpropagate(99, 1.0)


@given(st.lists(st.tuples(st.integers(0, 50), st.sampled_from([-1.0, 1.0, 2.0, 3.0])), max_size=80))
def test_path_consistency(ops):
    t = SearchTree()
    for pick, reward in ops:
        ids = list(t.nodes)
        child = t.add_child(ids[pick % len(ids)])
        t.backpropagate(child.id, reward)
    for node in t.nodes.values():
        if node.parent is not None:
            assert node.n <= t.get(node.parent).n
    assert t.get(t.root).n == len(ops)


# -- terminal marking --------------------------------------------------------

def test_fresh_node_not_terminal():
    t = SearchTree()
    a = t.add_child(t.root)
    assert t.mark_terminal_if_needed(a.id, TreeConfig()) is False
    assert not a.terminal


def test_debug_streak_marks_terminal():
    t = SearchTree()
    a = t.add_child(t.root)
    a.debug_streak = 4
    assert t.mark_terminal_if_needed(a.id, TreeConfig(tau_debug=3))
    assert a.terminal


def test_stagnation_marks_terminal():
    t = SearchTree()
    a = t.add_child(t.root)
    a.stagnant_improves = 3
    assert t.mark_terminal_if_needed(a.id, TreeConfig(tau_improve=2))


def test_thresholds_are_strict():
    t = SearchTree()
    a = t.add_child(t.root)
    a.debug_streak = 3
    a.stagnant_improves = 3
    assert not t.mark_terminal_if_needed(a.id, TreeConfig(tau_debug=3, tau_improve=3))


def test_terminal_unknown():
    with pytest.raises(UnknownNode):
        SearchTree().mark_terminal_if_needed(5, TreeConfig())


# -- restart -----------------------------------------------------------------

def test_restart_single_scored_node():
    t = SearchTree()
    a = t.add_child(t.root)
    a.aggregated_score = 0.4
    t.backpropagate(a.id, 2.0)
    a.terminal = True
    a.debug_streak = 2
    rep = t.restart({a.id: 0.5}, TreeConfig(reseed_k=3))
    assert rep.retained == [a.id]
    assert (a.q, a.n, a.terminal, a.debug_streak, a.stagnant_improves) == (0.0, 0, False, 0, 0)
    assert a.aggregated_score == 0.5
    assert a.parent == rep.new_root == t.root


def test_restart_true_scores_outrank_proxy_only():
    t = SearchTree()
    a, b, c = (t.add_child(t.root) for _ in range(3))
    a.true_score, a.aggregated_score = 0.9, 0.1
    b.aggregated_score = 0.99
    c.true_score, c.aggregated_score = 0.7, 0.2
    rep = t.restart({a.id: 0.1, b.id: 0.99, c.id: 0.2}, TreeConfig(reseed_k=2))
    assert set(rep.retained) == {a.id, c.id}
    assert b.id in rep.pruned


def test_restart_top_k_of_proxy_only():
    t = SearchTree()
    nodes = [t.add_child(t.root) for _ in range(5)]
    scores = {n.id: s for n, s in zip(nodes, [0.3, 0.9, 0.1, 0.7, 0.5])}
    rep = t.restart(scores, TreeConfig(reseed_k=2))
    brute = sorted(scores, key=lambda v: scores[v], reverse=True)[:2]
    assert set(rep.retained) == set(brute)


def test_restart_prunes_and_never_reuses_ids():
    t = SearchTree()
    ids = chain(t, 4)
    for v in ids[1:]:
        t.get(v).aggregated_score = float(v)
    before = set(t.nodes)
    rep = t.restart({}, TreeConfig(reseed_k=1))
    assert rep.new_root not in before
    assert rep.retained == [ids[-1]]
    assert set(rep.pruned) == before - {ids[-1]}
    assert len(t.get(t.root).children) == 1
    assert t.add_child(t.root).id > max(before | {rep.new_root})


def test_restart_empty_tree():
    with pytest.raises(EmptyTree):
        SearchTree().restart({}, TreeConfig())


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.integers(1, 6))
def test_restart_retains_min_k_scored(scores, k):
    t = SearchTree()
    nodes = [t.add_child(t.root) for _ in scores]
    t.add_child(nodes[0].id)  # unscored grandchild
    rep = t.restart({n.id: s for n, s in zip(nodes, scores)}, TreeConfig(reseed_k=k))
    assert len(rep.retained) == min(k, len(scores))
    assert all(t.get(v).n == 0 and t.get(v).q == 0 for v in rep.retained)


def test_tree_config_validation():
    with pytest.raises(ValueError):
        TreeConfig(c_explore=0)
    with pytest.raises(ValueError):
        TreeConfig(tau_debug=0)
