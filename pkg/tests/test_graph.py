import random

import pytest
from hypothesis import given, settings, strategies as st

from fbcwalls.graph import (
    Graph,
    GraphError,
    GraphMap,
    apply_map,
    direction_map,
    illegal_turns,
    inverse_name,
    iterate_tight,
    path_legal,
    tighten,
    turn_collision,
)
from fbcwalls.strata import Filtration

from conftest import random_reduced_word, random_rose_map, rose, rose_map


class TestGraphBasics:
    def test_involution(self):
        g = Graph(["u", "w"], [("a", "u", "w")])
        assert g.edge("A").src == "w" and g.edge("A").dst == "u"
        assert g.positive("A") == "a"

    def test_bad_names_rejected(self):
        with pytest.raises(GraphError):
            Graph(["v"], [("1", "v", "v")])
        with pytest.raises(GraphError):
            Graph(["v"], [("t", "v", "v")])

    def test_word_parse_roundtrip(self):
        g = rose("a", "b")
        p = g.parse_word("aBa")
        assert p.edges == ("a", "B", "a")
        assert p.word() == "aBa"

    def test_path_endpoint_mismatch(self):
        g = Graph(["u", "w", "x"], [("a", "u", "w"), ("b", "x", "u")])
        with pytest.raises(GraphError):
            g.path(["a", "b"])


class TestTighten:
    def test_full_cancellation(self):
        g = rose("a", "b")
        p = g.parse_word("aA")
        out = tighten(p)
        assert len(out) == 0 and out.src == "v"

    def test_inner_cancellation(self):
        g = rose("a", "b")
        assert tighten(g.parse_word("abBa")).word() == "aa"

    def test_nested_cancellation(self):
        g = rose("a", "b", "c")
        assert tighten(g.parse_word("baABc")).word() == "c"

    def test_preserves_endpoints(self):
        g = Graph(["u", "w"], [("a", "u", "w"), ("b", "u", "w")])
        p = g.parse_word("aB")
        out = tighten(p)
        assert out.src == "u" and out.dst == "u"


class TestApplyAndIterate:
    def test_apply_single_edge(self, golden_map):
        p = golden_map.graph.parse_word("a")
        assert apply_map(golden_map, p).word() == "b"

    def test_apply_concatenates_unreduced(self, golden_map):
        p = golden_map.graph.parse_word("ab")
        assert apply_map(golden_map, p).word() == "bab"

    def test_apply_empty(self, golden_map):
        p = golden_map.graph.path([], "v")
        out = apply_map(golden_map, p)
        assert len(out) == 0 and out.src == "v"

    def test_iterate_poly(self, poly_map):
        p = poly_map.graph.parse_word("b")
        assert iterate_tight(poly_map, p, 3).word() == "baaa"

    def test_iterate_fixed_edge(self, poly_map):
        p = poly_map.graph.parse_word("a")
        assert iterate_tight(poly_map, p, 10).word() == "a"

    def test_iterate_golden(self, golden_map):
        p = golden_map.graph.parse_word("a")
        assert iterate_tight(golden_map, p, 3).word() == "bab"

    def test_iterate_additivity_random(self):
        rng = random.Random(7)
        for _ in range(25):
            phi = random_rose_map(rng, rank=2)
            word = random_reduced_word(rng, phi.graph, 4)
            p = phi.graph.parse_word(word) if word else phi.graph.path([], "v")
            for m in range(0, 4):
                for n in range(0, 4):
                    lhs = iterate_tight(phi, p, m + n)
                    rhs = iterate_tight(phi, iterate_tight(phi, p, m), n)
                    assert lhs == rhs


class TestDirectionsAndTurns:
    def test_direction_map_golden(self, golden_map):
        D = direction_map(golden_map)
        assert D["a"] == "b"
        assert D["b"] == "a"
        assert D["A"] == "B"
        assert D["B"] == "B"

    def test_direction_map_identity(self):
        phi = rose_map({"a": "a", "b": "b"})
        D = direction_map(phi)
        assert all(D[d] == d for d in phi.graph.oriented_edges)

    def test_illegal_turns_fold_map(self):
        phi = rose_map({"a": "ab", "b": "ab"})
        assert frozenset(("a", "b")) in illegal_turns(phi)

    def test_illegal_turns_identity(self):
        phi = rose_map({"a": "a", "b": "b"})
        assert illegal_turns(phi) == frozenset()

    def test_illegal_turns_golden_oracle(self, golden_map):
        # independent brute force: iterate every pair up to |directions|^2 steps
        assert illegal_turns(golden_map) == brute_force_illegal(golden_map)

    def test_illegal_turns_random_oracle(self):
        rng = random.Random(11)
        for _ in range(50):
            phi = random_rose_map(rng, rank=rng.choice((2, 3)))
            assert illegal_turns(phi) == brute_force_illegal(phi)

    def test_direction_map_commutes_on_legal_paths(self):
        rng = random.Random(3)
        checked = 0
        while checked < 40:
            phi = random_rose_map(rng, rank=2)
            word = random_reduced_word(rng, phi.graph, 4)
            if not word:
                continue
            p = phi.graph.parse_word(word)
            if not path_legal(phi, p):
                continue
            D = direction_map(phi)
            image = tighten(apply_map(phi, p))
            if len(image) == 0:
                continue
            assert D[p.edges[0]] == image.edges[0]
            checked += 1


def brute_force_illegal(phi):
    g = phi.graph
    D = direction_map(phi)
    dirs = g.oriented_edges
    bound = len(dirs) ** 2
    out = set()
    for i, d1 in enumerate(dirs):
        for d2 in dirs[i + 1 :]:
            if g.edge(d1).src != g.edge(d2).src:
                continue
            a, b = d1, d2
            for _ in range(bound + 1):
                if a == b:
                    out.add(frozenset((d1, d2)))
                    break
                a, b = D[a], D[b]
    return frozenset(out)


class TestLegality:
    def test_golden_ab_legal(self, golden_map):
        assert path_legal(golden_map, golden_map.graph.parse_word("ab"))

    def test_golden_has_one_illegal_turn(self, golden_map):
        # directions A and B collide after one step, so aB takes an illegal turn
        assert turn_collision(golden_map, "A", "B") == "B"
        assert not path_legal(golden_map, golden_map.graph.parse_word("aB"))

    def test_fold_map_illegal_path(self):
        phi = rose_map({"a": "ab", "b": "ab"})
        assert not path_legal(phi, phi.graph.parse_word("Ab"))

    def test_single_edge_always_legal(self):
        phi = rose_map({"a": "ab", "b": "ab"})
        for d in phi.graph.oriented_edges:
            assert path_legal(phi, phi.graph.parse_word(d))

    def test_level_legality_allows_lower_collisions(self, poly_map):
        filt = Filtration(poly_map.graph, [["a"], ["a", "b"]])
        # direction orbits of b and A collide on a, which lies in the lower level
        phi = rose_map({"a": "a", "b": "ba"})
        filt2 = Filtration(phi.graph, [["a"], ["a", "b"]])
        c = turn_collision(phi, "B", "a")
        if c is not None:
            assert path_legal(phi, phi.graph.parse_word("bA"), filt2, 2) == (
                phi.graph.positive(c) in filt2.level_edges(1)
            )
        assert path_legal(poly_map, poly_map.graph.parse_word("ba"), filt, 2)

    def test_requires_reduced(self, golden_map):
        with pytest.raises(GraphError):
            path_legal(golden_map, golden_map.graph.parse_word("aA"))


@st.composite
def reduced_words(draw, rank=3, max_len=12):
    names = ["a", "b", "c"][:rank]
    letters = names + [n.upper() for n in names]
    n = draw(st.integers(min_value=0, max_value=max_len))
    word = []
    while len(word) < n:
        nxt = draw(st.sampled_from(letters))
        if not word or nxt != word[-1].swapcase():
            word.append(nxt)
    return "".join(word)


@st.composite
def raw_words(draw, rank=3, max_len=12):
    names = ["a", "b", "c"][:rank]
    letters = names + [n.upper() for n in names]
    return "".join(draw(st.lists(st.sampled_from(letters), max_size=max_len)))


class TestTightenProperties:
    @settings(max_examples=200, deadline=None)
    @given(raw_words())
    def test_idempotent_and_nonincreasing(self, word):
        g = rose("a", "b", "c")
        p = g.path(tuple(word), "v")
        t = tighten(p)
        assert tighten(t) == t
        assert len(t) <= len(p)
        assert t.is_reduced()

    @settings(max_examples=200, deadline=None)
    @given(raw_words())
    def test_pp_inverse_cancels(self, word):
        g = rose("a", "b", "c")
        p = g.path(tuple(word), "v")
        assert len(tighten(p * p.inverse())) == 0
