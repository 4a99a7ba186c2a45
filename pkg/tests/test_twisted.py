import math

import numpy as np
import pytest

from growthgap.errors import ResourceError, ValidationError
from growthgap.groups import parse_group, schreier_ball, subgroup_sphere_counts
from growthgap.horocode import build_coding
from growthgap.transfer import Potential, transfer_matrix
from growthgap.twisted import (folner_profile, growth_gap_report, monotone_envelope, rho_lambda,
                               rho_lambda_curve, seed_bound_constant, seed_function, twisted_matrix)

F2 = parse_group("free:2")
EXT = build_coding(F2).extension()
CASE1 = Potential.case1(EXT.sft, F2)
ROOT3 = 3 ** -0.5


def dense_oracle(Y, m):
    """Direct construction from the definition, indexed by (window, group element)."""
    words = EXT.sft.admissible_words(m)
    elems = [Y.labels[v] for v in range(Y.n_vertices)]
    pos = {g: i for i, g in enumerate(elems)}
    n = len(elems)
    M = np.zeros((len(words) * n, len(words) * n))
    for i, w in enumerate(words):
        for j, u in enumerate(words):
            if u[1:] != w[:m - 1]:
                continue
            for zi, z in enumerate(elems):
                src = F2.mul(z, F2.inv(F2.from_word(u[:1])))
                if src in pos:
                    M[i * n + zi, j * n + pos[src]] = 1 / 3
    return M


def test_trivial_r1_matrix_against_oracle():
    Y = schreier_ball(F2, "trivial", 1)
    M = twisted_matrix(EXT, CASE1, Y)
    assert M.dim == 60
    A = M.to_sparse().toarray()
    assert set(np.unique(A)) == {0.0, 1 / 3}
    assert np.array_equal(A, dense_oracle(Y, 2))
    x = np.random.default_rng(0).normal(size=M.dim)
    assert np.allclose(M.matvec(x).ravel(), A @ x)


def test_whole_subgroup_is_untwisted():
    Y = schreier_ball(F2, "whole", 4)
    M = twisted_matrix(EXT, CASE1, Y)
    T = transfer_matrix(EXT.sft, CASE1, 2)
    x = np.random.default_rng(1).random(len(T.words))
    assert np.allclose(M.matvec(x).ravel(), T.apply(x))


def test_scaling_potential_scales_matrix():
    Y = schreier_ball(F2, "ker-ab", 3)
    A = twisted_matrix(EXT, CASE1, Y).to_sparse()
    B = twisted_matrix(EXT, CASE1.scaled(2.5), Y).to_sparse()
    assert abs(B - 2.5 * A).max() < 1e-15


def test_depth_below_requirement_rejected():
    with pytest.raises(ValidationError):
        twisted_matrix(EXT, CASE1, schreier_ball(F2, "trivial", 1), m=1)
    with pytest.raises(ValidationError):
        seed_function(schreier_ball(F2, "trivial", 1), radius=2)


def test_dimension_budget(monkeypatch):
    monkeypatch.setenv("GROWTHGAP_MEMORY_MIB", "1")
    with pytest.raises(ResourceError):
        twisted_matrix(EXT, CASE1, schreier_ball(F2, "trivial", 8))


def test_tree_terms_are_exactly_inverse_root3():
    # on the tree each row of Mⁿδ_e has 3ⁿ unit entries of size 3^{-n}
    res = rho_lambda_curve(F2, "trivial", [12])[0]
    exact = [t for t in res.terms if t["exact"]]
    assert len(exact) == res.horizon == 12
    for t in exact:
        assert t["nth_root"] == pytest.approx(ROOT3, abs=1e-12)
    assert res.rho_hat == pytest.approx(ROOT3, abs=1e-12)
    assert res.certified_lower <= ROOT3 + 1e-9


def test_ker_ab_large_radius():
    res = rho_lambda_curve(F2, "ker-ab", [30])[0]
    assert res.rho_hat >= 0.95
    assert res.method == "certified-lower-bound"


@pytest.mark.parametrize("H", ["trivial", "ker-ab", "ker-mod:2", "ker-mod:3", "whole"])
def test_estimate_never_exceeds_rho(H):
    for res in rho_lambda_curve(F2, H, [4, 6, 8]):
        assert res.rho_hat <= 1 + 1e-9
        assert res.certified_lower <= 1 + 1e-9


def test_certified_lower_bounds_increase_with_radius():
    res = rho_lambda_curve(F2, "ker-ab", [4, 8, 12, 16])
    lows = [r.certified_lower for r in res]
    assert lows == sorted(lows)


def test_monotone_envelope():
    assert monotone_envelope([0.5, 0.4, 0.7, 0.6]) == [0.5, 0.5, 0.7, 0.7]
    assert monotone_envelope([]) == []


def test_operator_norm_bounded_by_untwisted():
    # ‖ℒ_λⁿΦ‖ <= ‖ℒⁿ𝟙‖_∞ ‖Φ‖ and ‖ℒⁿ𝟙‖_∞ = 1 for the case-1 potential
    Y = schreier_ball(F2, "ker-mod:3", 6)
    M = twisted_matrix(EXT, CASE1, Y)
    rng = np.random.default_rng(2)
    for _ in range(20):
        V = rng.normal(size=(M.n_words, M.n_cosets))
        W = V
        for _ in range(5):
            W = M.matvec(W)
            assert M.sup_norm(W) <= M.sup_norm(V) + 1e-12


def test_seed_bound_on_ker_ab():
    # per-h0 cover (R, N) = (1, 0): B2 = |B(1)|^2 e^{2 ln 3} = 225
    B2 = seed_bound_constant(F2, 1, 0, [1.0])
    assert B2 == pytest.approx(225)
    counts = subgroup_sphere_counts(F2, "ker-ab", 8)
    res = rho_lambda_curve(F2, "ker-ab", [9], n_max=8, seed_radius=1)[0]
    norm_psi = math.sqrt(5)
    for t in res.terms:
        assert t["exact"]
        lhs = counts[t["n"]] * 3.0 ** -t["n"]
        assert lhs <= B2 * t["sup_norm"] * norm_psi + 1e-12


def test_folner_profile():
    prof = folner_profile(schreier_ball(F2, "ker-ab", 10))
    # ℓ¹ spheres in Z²: 4r over 2r²+2r+1
    assert prof[-1] == (10, pytest.approx(40 / 221))
    tree = folner_profile(schreier_ball(F2, "trivial", 6))
    assert all(v > 0.6 for _, v in tree)


@pytest.mark.parametrize("H,verdict", [
    ("trivial", "CONSISTENT-GAP"),
    ("whole", "CONSISTENT-AMENABLE"),
    ("ker-ab", "CONSISTENT-AMENABLE"),
    ("ker-mod:2", "CONSISTENT-AMENABLE"),
])
def test_gap_report_verdicts(H, verdict):
    rep = growth_gap_report(F2, H)
    assert rep["verdict"] == verdict
    env = [c["rho_lambda_envelope"] for c in rep["curve"]]
    assert env == sorted(env)
    assert rep["rho"]["value"] == pytest.approx(1.0)
    assert rep["constants"] == {"kappa": 1, "ell": 0}


def test_gap_report_lower_bound_trivial():
    rep = growth_gap_report(F2, "trivial", {"radii": [6, 8]})
    assert rep["lower_bound"]["value"] == pytest.approx(1 / 3)
    assert rep["omega_H"] == {"value": 0.0, "method": "exact"}
