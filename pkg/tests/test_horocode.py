import itertools
import random

import pytest

from growthgap.errors import ValidationError
from growthgap.extension import cocycle
from growthgap.groups import parse_group
from growthgap.horocode import (build_coding, encode_horofunction, predecessor_words,
                                select_visible_component, shift_step, sphere_cover_search,
                                sphere_embedding_check)
from growthgap.sft import Sft

F2 = parse_group("free:2")
FREE = build_coding(F2)
P_LAST = parse_group("product(free:2,cyclic:2)", "a<A<b<B<t")
P_FIRST = parse_group("product(free:2,cyclic:2)", "t<a<A<b<B")


def test_exact_free_is_non_backtracking():
    assert FREE.coded_sft == Sft.non_backtracking(F2.gens)
    assert len(FREE.coded_sft.windows) == 12
    assert FREE.theta_table == {x: x for x in "aAbB"}


def test_shift_step_examples():
    assert shift_step(FREE, "abab") == ("a", ("b", "a", "b"))
    assert shift_step(FREE, "Ba")[0] == "B"
    with pytest.raises(ValidationError):
        shift_step(FREE, "aA")


@pytest.mark.parametrize("group", [F2, P_LAST, P_FIRST])
def test_patch_axioms(group):
    c = build_coding(group)
    for p in c.patches.values():
        assert p.axiom_violations(group) == []
        assert c.theta_table  # θ is the smallest generator with value −1
    for s, p in c.patches.items():
        assert c.theta_table[s] == p.theta(group)


def test_generic_backend_conjugate_to_exact():
    g = build_coding(F2, 1, 3, backend="generic")
    assert g.certified and g.witness.ok
    assert g.stabilization_radius is not None


def test_generic_thresholds_enforced():
    with pytest.raises(ValidationError):
        build_coding(F2, 1, 2, backend="generic")


def test_generic_product_witness():
    g = build_coding(P_FIRST, 1, 3, backend="generic")
    assert g.witness.ok and g.certification == "certified-by-comparison"


def test_layers_order_dependence():
    last = build_coding(P_LAST)
    comps = last.decomposition.components
    assert len(comps) == 2
    assert sorted({last.layer[s] for s in c.alphabet}.pop() for c in comps) == ["1", "t"]
    first = build_coding(P_FIRST)
    for w in first.coded_sft.windows:
        if first.layer[w[0]] == "t":
            assert first.layer[w[1]] == "1"
    assert [sorted({first.layer[s] for s in c.alphabet}) for c in first.decomposition.components] == [["1"]]


def test_conjugacy_emissions_equal_cocycle():
    rng = random.Random(11)
    for coding in (FREE, build_coding(P_FIRST)):
        ext = coding.extension()
        sft = coding.coded_sft
        group = coding.group
        for _ in range(10_000 if coding is FREE else 2000):
            n = rng.randint(1, 6)
            w = rng.choice(sft.windows)
            while len(w) < n + 1:
                w = w + (rng.choice(sft.successors(w[-2:]))[-1],)
            g, prefix = group.identity, w
            for _ in range(n):
                a, prefix = shift_step(coding, prefix)
                g = group.act(g, a)
            assert g == cocycle(ext, w, n)


def _product_h(coding, ray, layer):
    F = coding.group.left

    def h(g):
        f, u = g
        k = 0
        for a, b in zip(f, ray):
            if a != b:
                break
            k += 1
        return len(f) - 2 * k + (u != layer) - (layer != 0)
    return h


def test_gradient_ray_minimality_brute_force():
    rng = random.Random(5)
    for group in (P_FIRST, P_LAST):
        coding = build_coding(group)
        t = group.right.gens.order[0]
        for _ in range(20):
            ray = [rng.choice("aAbB")]
            while len(ray) < 12:
                ray.append(rng.choice([x for x in "aAbB" if x != ray[-1].swapcase()]))
            layer = rng.choice([0, 1])
            h = _product_h(coding, ray, layer)
            # all gradient paths of length 6, by brute force over letter sequences
            best = None
            for word in itertools.product(group.gens.order, repeat=6):
                g, ok = group.identity, True
                for a in word:
                    nxt = group.act(g, a)
                    if h(nxt) != h(g) - 1:
                        ok = False
                        break
                    g = nxt
                if ok:
                    best = word
                    break               # product() enumerates in the generator order
            code = encode_horofunction(coding, tuple(ray), 6, "1" if layer == 0 else t)
            emitted = tuple(coding.theta_table[s] for s in code)
            assert emitted == best


def test_visible_component_selection():
    assert select_visible_component(FREE, test_radius=4).U == ((),)
    sel = select_visible_component(build_coding(P_FIRST), test_radius=3, n_max=4, cap=2)
    assert sel.radius <= 2


def test_sphere_embedding():
    e1 = sphere_embedding_check(FREE, 0, ("a",), 1)
    assert e1.size == 3 and e1.image_size == 3 and e1.passed
    e4 = sphere_embedding_check(FREE, 0, ("a",), 4)
    assert e4.size == 81 and e4.sphere_size == 108 and e4.passed
    e0 = sphere_embedding_check(FREE, 0, ("a",), 0)
    assert e0.size == 1 and predecessor_words(FREE, 0, ("a",), 0) == [()]


def test_sphere_cover():
    for n in range(1, 7):
        assert sphere_cover_search(FREE, 0, (), n, 0, 0).found == (0, 0)
    # a single h0 misses the words ending in the inverse of its first letter
    assert sphere_cover_search(FREE, 0, ("a",), 3, 2, 2).found == (1, 0)


def test_sphere_cover_failure_on_small_caps():
    coding = build_coding(P_FIRST)
    sel = select_visible_component(coding, test_radius=3, n_max=4, cap=2)
    s = coding.decomposition.components[sel.index].alphabet[0]
    r = sphere_cover_search(coding, sel.index, (s,), 3, 0, 0)
    assert not r.passed and r.uncovered
