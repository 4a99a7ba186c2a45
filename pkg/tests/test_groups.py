import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from growthgap.errors import ResourceError, ValidationError
from growthgap.groups import (BOUNDARY, ball, gromov_product, growth_rate, parse_group,
                              parse_subgroup, schreier_ball, subgroup_sphere_counts)

F2 = parse_group("free:2")


def brute_reduced_words(k, n):
    """Independent oracle: all reduced words of length n by filtering all words."""
    letters = [chr(ord("a") + i) for i in range(k)] + [chr(ord("A") + i) for i in range(k)]
    inv = {a: a.swapcase() for a in letters}
    return [w for w in itertools.product(letters, repeat=n)
            if all(w[i + 1] != inv[w[i]] for i in range(n - 1))]


def test_free_sphere_counts_match_brute_force():
    t = ball(F2, 5, materialize=5)
    for n in range(6):
        assert len(t.sphere(n)) == len(brute_reduced_words(2, n)) == t.sizes[n]
    assert t.sizes[:4] == (1, 4, 12, 36)


def test_shortlex_sphere_order():
    s1 = ball(F2, 1, materialize=1).sphere(1)
    assert [F2.format(g) for g in s1] == ["a", "A", "b", "B"]
    G = parse_group("free:2", "b<B<a<A")
    assert [G.format(g) for g in ball(G, 1, materialize=1).sphere(1)] == ["b", "B", "a", "A"]


def test_product_generators_and_spheres():
    P = parse_group("product(free:2,cyclic:2)")
    assert len(ball(P, 1, materialize=1).sphere(1)) == 5
    counts = P.sphere_counts(4)
    f = F2.sphere_counts(4)
    # S(n) of F2 x Z/2 = S_F(n) x {1} ∪ S_F(n-1) x {t}
    assert counts == [f[n] + (f[n - 1] if n else 0) for n in range(5)]


def test_product_renames_clashing_letters():
    P = parse_group("product(free:2,free:1)")
    assert len(set(P.gens.letters)) == 6


def test_cyclic_group():
    C = parse_group("cyclic:5")
    # every non-identity element is a generator
    assert C.sphere_counts(4) == [1, 4, 0, 0, 0]
    assert C.exact_growth_rate() == 0


@pytest.mark.parametrize("spec", ["fre:2", "free:-1", "product(free:2)", "cyclic:0", ""])
def test_malformed_specs(spec):
    with pytest.raises(ValidationError):
        parse_group(spec)


def test_growth_rate_free2_and_finite():
    est = growth_rate(ball(F2, 20, materialize=0))
    assert abs(est.omega_hat - math.log(3)) < 1e-8
    assert est.c1_hat <= 2
    assert growth_rate(ball(parse_group("cyclic:4"), 10)).omega_hat == 0


def test_materialization_over_budget(monkeypatch):
    monkeypatch.setenv("GROWTHGAP_MEMORY_MIB", "1")
    with pytest.raises(ResourceError):
        ball(F2, 12, materialize=12)


elements = st.lists(st.sampled_from("aAbB"), max_size=6).map(lambda w: F2.from_word(w))


@settings(max_examples=200, deadline=None)
@given(elements, elements, elements)
def test_metric_axioms(x, y, z):
    d = F2.distance
    assert d(x, x) == 0
    assert d(x, y) == d(y, x)
    assert d(x, z) <= d(x, y) + d(y, z)
    assert (d(x, y) == 0) == (x == y)


@settings(max_examples=200, deadline=None)
@given(elements, elements, elements, elements)
def test_four_point_condition_tree(x, y, z, w):
    # δ = 0 for the tree: (x|z)_w >= min((x|y)_w, (y|z)_w)
    g = lambda a, b: gromov_product(F2, a, b, w)
    assert g(x, z) >= min(g(x, y), g(y, z))


def test_subgroup_sphere_counts_ker_ab_oracle():
    # brute-force: reduced words with zero exponent sums
    for n in range(0, 9):
        words = brute_reduced_words(2, n)
        expected = sum(1 for w in words if w.count("a") == w.count("A") and w.count("b") == w.count("B"))
        assert subgroup_sphere_counts(F2, "ker-ab", n)[n] == expected


def test_schreier_ball_sizes():
    assert schreier_ball(F2, "trivial", 2).n_vertices == 17
    assert schreier_ball(F2, "ker-ab", 3).n_vertices == 25       # ℓ¹ ball in Z²
    Y = schreier_ball(F2, "whole", 3)
    assert Y.n_vertices == 1 and (Y.nbr == 0).all()
    assert schreier_ball(F2, "ker-mod:3", 10).n_vertices == 9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("aAbB"), max_size=5), st.sampled_from(["trivial", "ker-ab", "ker-mod:2"]))
def test_schreier_follow_matches_labels(word, spec):
    H = parse_subgroup(spec, F2)
    Y = schreier_ball(F2, H, 6)
    v = Y.follow(0, word)
    assert v != BOUNDARY
    assert Y.labels[v] == H.label_of(F2.from_word(word))
    # vectorised follow agrees
    assert Y.follow_all(word)[0] == v


def test_tree_ball_fast_path_consistent():
    fast = schreier_ball(F2, "trivial", 4)
    rng = np.random.default_rng(1)
    for _ in range(50):
        w = tuple(rng.choice(list("aAbB"), size=rng.integers(0, 5)))
        v = fast.follow(0, w)
        g = F2.from_word(w)
        assert fast.labels[v] == g
        assert fast.dist[v] == len(g)
