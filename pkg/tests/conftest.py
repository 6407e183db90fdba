import random

import pytest

from fbcwalls.graph import Graph, GraphMap


def rose(*names):
    return Graph(["v"], [(n, "v", "v") for n in names])


def rose_map(images, inverses=None):
    g = rose(*sorted(images))
    edge_map = {e: g.parse_word(w) for e, w in images.items()}
    inverse_map = (
        {e: g.parse_word(w) for e, w in inverses.items()} if inverses else None
    )
    return GraphMap(g, {"v": "v"}, edge_map, inverse_map)


@pytest.fixture
def poly_map():
    # a is fixed; b grows by appending a copy of a each step
    return rose_map({"a": "a", "b": "ba"}, {"a": "a", "b": "bA"})


@pytest.fixture
def golden_map():
    # the rank-2 substitution with golden-ratio growth
    return rose_map({"a": "b", "b": "ab"}, {"a": "bA", "b": "a"})


def random_rose_map(rng: random.Random, rank: int = 2, max_image_len: int = 3) -> GraphMap:
    """A random self-map of a rose with reduced, nontrivial edge images."""
    names = ["a", "b", "c"][:rank]
    g = rose(*names)
    letters = [n for n in names] + [n.upper() for n in names]
    edge_map = {}
    for e in names:
        length = rng.randint(1, max_image_len)
        word = [rng.choice(letters)]
        while len(word) < length:
            nxt = rng.choice(letters)
            if nxt != word[-1].swapcase():
                word.append(nxt)
        edge_map[e] = g.parse_word("".join(word))
    return GraphMap(g, {"v": "v"}, edge_map)


def random_reduced_word(rng: random.Random, graph: Graph, max_len: int) -> str:
    letters = list(graph.oriented_edges)
    length = rng.randint(0, max_len)
    word = []
    while len(word) < length:
        nxt = rng.choice(letters)
        if not word or nxt != word[-1].swapcase():
            word.append(nxt)
    return "".join(word)
