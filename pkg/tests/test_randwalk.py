import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from growthgap.errors import ValidationError
from growthgap.groups import parse_group
from growthgap.randwalk import (convolution_constants, convolution_counts, grigorchuk_rho,
                                kernel_growth_profile, orbit_count, return_probabilities,
                                rho_ell, rho_infinity_curve, sphere_measure,
                                verify_convolution_bounds)

F2 = parse_group("free:2")
LETTERS = "aAbB"


def reduce_word(w):
    out = []
    for x in w:
        if out and out[-1] == x.swapcase():
            out.pop()
        else:
            out.append(x)
    return "".join(out)


def sphere_words(ell):
    return sorted({reduce_word(w) for L in range(ell + 1) for w in itertools.product(LETTERS, repeat=L)
                   if len(reduce_word(w)) == ell})


def brute_return(ell, n, project=None):
    """Independent oracle: exact return probability by enumerating step sequences."""
    steps = sphere_words(ell)
    hits = 0
    for seq in itertools.product(steps, repeat=n):
        w = "".join(seq)
        if project is None:
            hits += reduce_word(w) == ""
        else:
            hits += project(w) == (0, 0)
    return Fraction(hits, len(steps) ** n)


def abelianize(w):
    return (w.count("a") - w.count("A"), w.count("b") - w.count("B"))


def test_tree_return_probabilities():
    assert brute_return(1, 2) == Fraction(1, 4)
    assert brute_return(1, 4) == Fraction(7, 64)
    s = return_probabilities(F2, "trivial", 1, n_max=4)
    assert s.method == "radial-dp"
    assert s.p[2] == pytest.approx(0.25) and s.p[4] == pytest.approx(7 / 64)
    assert s.p[1] == s.p[3] == 0.0


def test_ker_ab_against_z2_convolution():
    s = return_probabilities(F2, "ker-ab", 1, n_max=4)
    assert s.p[2] == pytest.approx(0.25)
    assert s.p[4] == pytest.approx(float(brute_return(1, 4, abelianize)))
    s2 = return_probabilities(F2, "ker-ab", 2, n_max=3)
    for n in range(4):
        assert s2.p[n] == pytest.approx(float(brute_return(2, n, abelianize)))


@pytest.mark.parametrize("ell", [1, 2])
@pytest.mark.parametrize("H", ["trivial", "ker-mod:2", "ker-mod:3"])
def test_schreier_dp_against_brute_convolution(ell, H):
    from growthgap.groups import parse_subgroup
    sub = parse_subgroup(H, F2)
    support = sphere_measure(F2, ell).support
    s = return_probabilities(F2, H, ell, n_max=4, method="schreier-dp")
    for n in range(5 if ell == 1 else 4):
        counts = convolution_counts(F2, ell, 1.0, n)
        mass = sum(c for g, c in counts.items() if sub.label_of(g) == sub.label_of(F2.identity))
        assert s.p[n] == pytest.approx(mass / len(support) ** n, abs=1e-15)
        assert s.certified[n]


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_radial_equals_schreier(ell):
    a = return_probabilities(F2, "trivial", ell, n_max=6, method="radial-dp")
    b = return_probabilities(F2, "trivial", ell, n_max=6, method="schreier-dp")
    assert np.allclose(a.p, b.p, atol=1e-14)


def test_radial_needs_free_trivial():
    with pytest.raises(ValidationError):
        return_probabilities(F2, "ker-ab", 1, n_max=4, method="radial-dp")


def test_truncated_terms_flagged():
    s = return_probabilities(F2, "ker-ab", 1, n_max=8, R=2)
    assert s.certified[4] and not s.certified[6]


def test_orbit_counts():
    assert orbit_count(F2, F2.identity, 1, 1.0, 2) == 4
    assert orbit_count(F2, F2.identity, 1, 1.0, 4) == 28
    assert orbit_count(F2, F2.from_word("ab"), 1, 1.0, 3) == 0        # parity
    assert orbit_count(F2, F2.from_word("ab"), 1, 1.0, 4) == \
        sum(1 for w in itertools.product(LETTERS, repeat=4) if reduce_word(w) == "ab")
    g = F2.from_word("aab")
    assert orbit_count(F2, g, 2, 1.0, 3) == convolution_counts(F2, 2, 1.0, 3).get(g, 0)


def test_measure_symmetric_and_sandwiched():
    for ell in (1, 2, 3):
        m = sphere_measure(F2, ell)
        assert m.is_symmetric()
        assert len(m.support) == 4 * 3 ** (ell - 1)
        assert m(F2.from_word("a" * ell)) == m.weight
        assert m(F2.identity) == 0.0
    thick = sphere_measure(F2, 2, delta=2.5)
    assert len(thick.support) == 1 + 4 + 12


def test_convolution_constants_free2():
    K = convolution_constants(F2)
    assert K["C1"] == 2
    assert K["C3"] == pytest.approx(1 / 3)
    assert K["D0"] == pytest.approx(4374)
    assert K["D"] == pytest.approx(13122)


def test_convolution_bounds_hold():
    res = verify_convolution_bounds(F2, ells=(1, 2), ns=(0, 1, 2, 3))
    assert res["passed"]
    assert all(r["holds"] for r in res["sandwich"])


def test_even_roots_monotone_and_below_rho():
    for ell in (1, 2, 4):
        r = rho_ell(return_probabilities(F2, "trivial", ell, n_max=120))
        assert r.monotone
        exact = (1 + ell / 2) * 3 ** (-ell / 2)
        assert r.value <= exact + 1e-12
        assert r.ratio_value <= exact + 1e-12
        assert r.ratio_value >= r.value - 1e-12
    # ℓ = 1 is Kesten's value for the 4-regular tree
    assert (1 + 1 / 2) * 3 ** -0.5 == pytest.approx(math.sqrt(3) / 2)


def test_whole_subgroup_curve_is_zero():
    cur = rho_infinity_curve(F2, "whole", [1, 2, 3], n_max=10)
    assert cur["target"] == pytest.approx(0.0)
    assert all(r["log_rho_over_ell"] == 0.0 for r in cur["rows"])


def test_grigorchuk_formula():
    assert grigorchuk_rho(3, 3) == pytest.approx(1.0)
    v = grigorchuk_rho(3, math.sqrt(3))
    assert v == pytest.approx(2 * math.sqrt(3) / 4)
    assert v.note.startswith("in regime")
    low = grigorchuk_rho(3, 1)
    assert low == pytest.approx(1.0) and "outside" in low.note
    with pytest.raises(ValidationError):
        grigorchuk_rho(3, 4)
    with pytest.raises(ValidationError):
        grigorchuk_rho(1, 1)


def test_kernel_growth_profile():
    prof = kernel_growth_profile(F2, "ker-ab", [2, 4, 6])
    for n, count, rate in prof:
        assert count == sum(1 for w in sphere_words(n) if abelianize(w) == (0, 0))
    assert prof[0][2] == -math.inf
    assert prof[1][:2] == (4, 8)
    assert prof[1][2] == pytest.approx(math.log(8) / 4)
