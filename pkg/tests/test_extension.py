import random

import pytest

from growthgap.errors import InsufficientPrefixError
from growthgap.extension import (ExtensionSystem, LabellingMap, cocycle, find_visibility_set,
                                 reachable_set, verify_certificate, visibility_check)
from growthgap.groups import ball, parse_group
from growthgap.horocode import build_coding, select_visible_component
from growthgap.sft import Sft, communicating_classes

F2 = parse_group("free:2")
EXT = build_coding(F2).extension()


def random_prefix(sft, n, rng):
    w = rng.choice(sft.windows)
    while len(w) < n:
        w = w + (rng.choice(sft.successors(w[-sft.memory:]))[-1],)
    return w[:n]


def test_cocycle_basics():
    assert cocycle(EXT, "abA", 0) == ()
    assert cocycle(EXT, "abA", 2) == ("a", "b")
    with pytest.raises(InsufficientPrefixError):
        cocycle(EXT, "ab", 3)


def test_cocycle_identity_random_prefixes():
    rng = random.Random(7)
    for _ in range(1000):
        p, q = rng.randint(0, 5), rng.randint(0, 5)
        x = random_prefix(EXT.sft, p + q + 1, rng)
        lhs = cocycle(EXT, x, p + q)
        rhs = F2.mul(cocycle(EXT, x, p), cocycle(EXT, x[p:], q))
        assert lhs == rhs
        assert len(lhs) == p + q        # coding cocycles are geodesic


def test_cocycle_depends_on_cylinder_only():
    rng = random.Random(3)
    for _ in range(100):
        x = random_prefix(EXT.sft, 4, rng)
        vals = {cocycle(EXT, y, 4) for y in EXT.sft.admissible_words(6) if y[:4] == x}
        assert len(vals) == 1


def test_reachable_free2_is_sphere():
    reach = reachable_set(EXT, 4)
    spheres = ball(F2, 4, materialize=4)
    for n in range(5):
        assert set(reach[n]) == set(spheres.sphere(n))
    assert len(reach[3]) == 36


def test_one_letter_full_shift():
    Z = parse_group("free:1")
    sft = Sft.full_shift(["x"])
    ext = ExtensionSystem(sft, LabellingMap(1, {("x",): ("a",)}), Z)
    reach = reachable_set(ext, 4)
    assert [reach[n] for n in range(5)] == [[()], [("a",)], [("a", "a")], [("a",) * 3], [("a",) * 4]]


def test_visibility_free2():
    v = visibility_check(EXT, [()], 6, 6)
    assert v.verdict == "PASS"
    for cert in v.certificates.values():
        assert verify_certificate(EXT, cert)


def test_visibility_fail_on_single_ray():
    # reducible shift whose only recurrent path is b^∞, θ(b) = y
    sft = Sft.from_transitions(["a", "b"], {"a": ["a", "b"], "b": ["b"]})
    comp = [c for c in communicating_classes(sft).components if c.alphabet == ("b",)][0]
    G = parse_group("free:2", "b<B<a<A")
    ext = ExtensionSystem(comp, LabellingMap(1, {("b",): ("b",)}), G)
    v = visibility_check(ext, ball(G, 1, materialize=1).ball(1), 5, 8)
    assert v.verdict == "FAIL"
    assert ("a",) * 5 in v.uncovered


def test_find_visibility_set_free2():
    k, v = find_visibility_set(EXT, 5, 5)
    assert k == 0 and v.passed


def test_product_component_visibility_radius5():
    P = parse_group("product(free:2,cyclic:2)")
    sel = select_visible_component(build_coding(P), test_radius=3, n_max=4, cap=2)
    v = visibility_check(sel.extension, ball(P, 2, materialize=2).ball(2), 5, 6)
    assert v.verdict == "PASS"
