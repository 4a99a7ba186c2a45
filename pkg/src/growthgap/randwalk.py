"""Sphere random walks on coset spaces: return probabilities, orbit counts and spectral radii."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .config import element_budget
from .errors import ConsistencyError, ResourceError, ValidationError
from .groups import (BOUNDARY, FreeGroup, TrivialSubgroup, WholeSubgroup, ball, growth_rate,
                     parse_subgroup, schreier_ball)


def _shell_lengths(ell, delta):
    return [L for L in range(int(math.floor(ell)) + 1) if L > ell - delta]


@dataclass(frozen=True)
class SphereMeasure:
    """Uniform probability on S(ℓ) = B(ℓ) \\ B(ℓ − δ)."""

    group: object
    ell: int
    delta: float
    support: tuple

    @property
    def weight(self):
        return 1.0 / len(self.support)

    def __call__(self, g):
        return self.weight if self.group.length(g) in _shell_lengths(self.ell, self.delta) else 0.0

    def is_symmetric(self):
        s = set(self.support)
        return all(self.group.inv(g) in s for g in self.support)


def sphere_measure(group, ell, delta=1.0):
    if ell < 0 or not delta > 0:
        raise ValidationError("sphere measure needs ℓ >= 0 and δ > 0")
    table = ball(group, ell, delta, materialize=ell)
    support = []
    for L in _shell_lengths(ell, delta):
        support.extend(table.sphere(L))
    return SphereMeasure(group, ell, delta, tuple(support))


def coornaert_c1(group, r_max=15):
    c1 = group.coornaert_constant() if hasattr(group, "coornaert_constant") else None
    if c1 is not None:
        return c1, "exact"
    omega = group.exact_growth_rate()
    table = ball(group, r_max, materialize=0)
    if omega is None:
        omega = growth_rate(table).omega_hat
    return max(table.ball_size(r) * math.exp(-omega * r) for r in range(r_max + 1)), "estimate"


def convolution_constants(group, delta=1.0):
    """C₁ (Coornaert), C₂ = C₁e^{5ωδ}, C₃ = 1 − C₁e^{−ωδ}, D₀ = C₂e^{2ωδ}, D = D₀/C₃."""
    omega = group.exact_growth_rate()
    method = "exact"
    if omega is None:
        omega = growth_rate(ball(group, 12, materialize=0)).omega_hat
        method = "estimate"
    c1, c1_method = coornaert_c1(group)
    c2 = c1 * math.exp(5 * omega * delta)
    c3 = 1 - c1 * math.exp(-omega * delta)
    d0 = c2 * math.exp(2 * omega * delta)
    return {
        "omega": omega, "delta": delta, "C1": c1, "C2": c2, "C3": c3, "D0": d0,
        "D": d0 / c3 if c3 > 0 else math.inf,
        "method": method if c1_method == "exact" else "estimate",
    }


# -- return probabilities ----------------------------------------------------

@dataclass
class ReturnSeries:
    ell: int
    delta: float
    p: list               # p_ℓ(n), n = 0..n_max
    certified: list       # True: exact; False: Dirichlet lower bound
    method: str           # schreier-dp | radial-dp | brute-convolution
    R: int | None = None

    def rows(self):
        out = []
        for n, (p, c) in enumerate(zip(self.p, self.certified)):
            root = p ** (1.0 / n) if n and p > 0 else (1.0 if n == 0 else 0.0)
            out.append({"n": n, "p": p, "root": root, "certified": c})
        return out


def _radial_transitions(k, ell, delta):
    """Distance-change law of one μ_ℓ step on the 2k-regular tree, by current distance d."""
    q = 2 * k - 1
    lengths = _shell_lengths(ell, delta)
    counts = {L: (1 if L == 0 else (q + 1) * q ** (L - 1)) for L in lengths}
    total = sum(counts.values())

    def law(d):
        out = Counter()
        for L, cL in counts.items():
            w = cL / total
            if L == 0:
                out[0] += w
                continue
            if d == 0:
                out[L] += w
                continue
            size = (q + 1) * q ** (L - 1)
            for j in range(0, min(L, d) + 1):
                if j == 0:
                    c = q ** L
                elif j < L and j < d:
                    c = (q - 1) * q ** (L - j - 1)
                elif j == d and d < L:
                    c = q ** (L - d)
                else:            # j == L <= d
                    c = 1
                out[d + L - 2 * j] += w * c / size
        return out
    return law


def _radial_return(group, ell, delta, n_max):
    law = _radial_transitions(group.k, ell, delta)
    reach = ell * n_max
    rows, cols, vals = [], [], []
    for d in range(reach + 1):
        for e, w in law(d).items():
            if e <= reach:
                rows.append(e)
                cols.append(d)
                vals.append(w)
    T = csr_matrix((vals, (rows, cols)), shape=(reach + 1, reach + 1))
    v = np.zeros(reach + 1)
    v[0] = 1.0
    p = [1.0]
    for _ in range(n_max):
        v = T @ v
        p.append(float(v[0]))
    return p


def walk_operator(schreier, measure):
    """Sparse sub-Markov matrix of the μ_ℓ walk on the interior cosets (exits dropped)."""
    nY = schreier.n_vertices
    w = measure.weight
    rows, cols = [], []
    z = np.arange(nY)
    for u in measure.support:
        t = schreier.follow_all(measure.group.word(u))
        keep = t != BOUNDARY
        rows.append(z[keep])
        cols.append(t[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return csr_matrix((np.full(len(rows), w), (rows, cols)), shape=(nY, nY))


def walk_distribution(group, subgroup, ell, delta, n, R=None):
    """(schreier, [distribution after k steps for k = 0..n]) started at the base coset."""
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    if R is None:
        R = math.ceil(n * ell / 2)
    Y = schreier_ball(group, subgroup, R)
    P = walk_operator(Y, sphere_measure(group, ell, delta))
    v = np.zeros(Y.n_vertices)
    v[0] = 1.0
    out = [v]
    PT = P.T.tocsr()
    for _ in range(n):
        v = PT @ v
        out.append(v)
    return Y, out


def return_probabilities(group, subgroup, ell, delta=1.0, n_max=24, R=None, method=None):
    """p_ℓ(n) = μ_ℓ^{*n}(H), n = 0..n_max.

    Schreier DP on the ball of radius R (default ⌈n_max·ℓ/2⌉).  p(n) is exact
    once ⌊n/2⌋·ℓ <= R: a returning path never gets farther than that from the
    base coset.  The radial DP is used for the trivial subgroup of a free group.
    """
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    if ell < 0 or n_max < 0:
        raise ValidationError("ℓ and n_max must be >= 0")
    if isinstance(subgroup, WholeSubgroup):
        return ReturnSeries(ell, delta, [1.0] * (n_max + 1), [True] * (n_max + 1), "schreier-dp", 0)
    radial_ok = isinstance(group, FreeGroup) and isinstance(subgroup, TrivialSubgroup) and group.k >= 1
    if method is None:
        method = "radial-dp" if radial_ok else "schreier-dp"
    if method == "radial-dp":
        if not radial_ok:
            raise ValidationError("radial-dp needs a free group and the trivial subgroup")
        return ReturnSeries(ell, delta, _radial_return(group, ell, delta, n_max),
                            [True] * (n_max + 1), "radial-dp", None)
    if method != "schreier-dp":
        raise ValidationError(f"unknown walk method {method!r}")
    if R is None:
        R = math.ceil(n_max * ell / 2)
    Y, dists = walk_distribution(group, subgroup, ell, delta, n_max, R)
    p = [float(v[0]) for v in dists]
    certified = [(n // 2) * ell <= R for n in range(n_max + 1)]
    return ReturnSeries(ell, delta, p, certified, "schreier-dp", R)


@dataclass
class RhoEll:
    roots: list           # (2n, p(2n)^{1/2n})
    ratio_bounds: list    # (2n, sqrt(p(2n)/p(2n-2)))
    monotone: bool
    value: float          # last even root: certified lower bound
    ratio_value: float
    method: str = "certified-lower-bound"


def rho_ell(series, tol=1e-12):
    evens = [(n, p) for n, p in enumerate(series.p) if n % 2 == 0 and n > 0]
    if len(evens) < 3:
        raise ValidationError("rho_ell needs at least 3 even terms")
    if all(p <= 0 for _, p in evens):
        raise ConsistencyError("all even return probabilities vanish for a symmetric measure")
    roots = [(n, p ** (1.0 / n)) for n, p in evens]
    monotone = all(b >= a - tol for (_, a), (_, b) in zip(roots, roots[1:]))
    ratios = []
    prev = 1.0
    for n, p in evens:
        if prev > 0:
            ratios.append((n, math.sqrt(p / prev)))
        prev = p
    return RhoEll(roots, ratios, monotone, roots[-1][1], ratios[-1][1] if ratios else 0.0)


# -- orbit counting ----------------------------------------------------------

def convolution_counts(group, ell, delta, n):
    """g -> |𝒪_ℓ(g, n)| by iterated convolution."""
    support = sphere_measure(group, ell, delta).support
    counts = {group.identity: 1}
    for _ in range(n):
        nxt = Counter()
        for g, c in counts.items():
            for u in support:
                nxt[group.mul(g, u)] += c
        counts = dict(nxt)
    return counts


def orbit_count(group, g, ell, delta, n):
    """|𝒪_ℓ(g, n)|, meeting in the middle."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n == 0:
        return 1 if g == group.identity else 0
    support = sphere_measure(group, ell, delta).support
    half = n // 2
    if len(support) ** (n - half) > element_budget():
        raise ResourceError(f"|S({ell})|^{n - half} products exceed the memory budget")
    if group.length(g) > n * ell:
        return 0
    left = convolution_counts(group, ell, delta, half) if half else {group.identity: 1}
    right = convolution_counts(group, ell, delta, n - half)
    return sum(c * right.get(group.mul(group.inv(x), g), 0) for x, c in left.items())


def verify_convolution_bounds(group, ells=(1, 2), ns=(0, 1, 2, 3, 4), delta=1.0):
    """Check the orbit-count and convolution bounds on every g with |g| <= nℓ."""
    K = convolution_constants(group, delta)
    omega, D0, D = K["omega"], K["D0"], K["D"]
    rows = []
    ok = True
    for ell in ells:
        size = len(sphere_measure(group, ell, delta).support)
        for n in ns:
            counts = convolution_counts(group, ell, delta, n)
            poly = (ell / delta + 1) ** n
            worst_o = worst_mu = 0.0
            for g in ball(group, n * ell, materialize=n * ell).ball(n * ell):
                d = group.length(g)
                c = counts.get(g, 0)
                bound_o = D0 ** n * poly * math.exp(omega * (n * ell - d) / 2)
                bound_mu = D ** n * poly * math.exp(-omega * (n * ell + d) / 2)
                mu = c / size ** n
                if c > bound_o * (1 + 1e-12) or mu > bound_mu * (1 + 1e-12):
                    ok = False
                worst_o = max(worst_o, c / bound_o)
                worst_mu = max(worst_mu, mu / bound_mu)
            rows.append({"ell": ell, "n": n, "max_ratio_orbit": worst_o, "max_ratio_mu": worst_mu})
    sandwich = []
    if K["C3"] > 0:
        for ell in ells:
            m = sphere_measure(group, ell, delta)
            lo = math.exp(-omega * ell) / K["C1"]
            hi = math.exp(-omega * ell) / K["C3"]
            good = lo <= m.weight * (1 + 1e-12) and m.weight <= hi * (1 + 1e-12)
            ok &= good
            sandwich.append({"ell": ell, "mu": m.weight, "lower": lo, "upper": hi, "holds": good})
    return {"passed": ok, "constants": K, "rows": rows, "sandwich": sandwich}


# -- ρ_∞ and the growth formula ----------------------------------------------

def rho_infinity_curve(group, subgroup, ells, n_max=200, delta=1.0):
    """(ℓ, (1/ℓ) ln ρ̂_ℓ) against max{−ω_G/2, ω_H − ω_G}."""
    from .twisted import subgroup_growth_estimate
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    omega_G = group.exact_growth_rate()
    if omega_G is None:
        omega_G = growth_rate(ball(group, 12, materialize=0)).omega_hat
    omega_H, h_method, _ = subgroup_growth_estimate(group, subgroup)
    target = max(-omega_G / 2, omega_H - omega_G)
    rows = []
    for ell in ells:
        r = rho_ell(return_probabilities(group, subgroup, ell, delta, n_max))
        value = math.log(r.value) / ell if r.value > 0 else -math.inf
        dev = abs(value - target) / abs(target) if target else abs(value - target)
        rows.append({"ell": ell, "rho_hat": r.value, "log_rho_over_ell": value,
                     "deviation": dev, "monotone": r.monotone})
    return {"target": target, "target_method": h_method, "rows": rows}


class GrigorchukValue(float):
    """A float carrying the validity note of the growth formula."""

    note: str

    def __new__(cls, value, note):
        obj = super().__new__(cls, value)
        obj.note = note
        return obj


def grigorchuk_rho(e_omega_F, e_omega_N):
    """ρ = (√x/(1+x))(√x/y + y/√x), computed as (x + y²)/(y(1 + x))."""
    x, y = e_omega_F, e_omega_N
    if not (x > 1 and y >= 1):
        raise ValidationError("grigorchuk_rho needs e^{ω_F} > 1 and e^{ω_N} >= 1")
    if y > x:
        raise ValidationError("e^{ω_N} cannot exceed e^{ω_F}")
    value = (x + y * y) / (y * (1 + x))
    if y >= math.sqrt(x):
        note = "in regime e^{ω_N} >= sqrt(e^{ω_F})"
    else:
        note = ("outside the regime e^{ω_N} >= sqrt(e^{ω_F}); the random-walk value there is "
                "2sqrt(x)/(1+x), not this expression")
    return GrigorchukValue(value, note)


def kernel_growth_profile(group, subgroup, ns):
    """(n, |S(n) ∩ H|, (1/n) ln|S(n) ∩ H|) from exact sphere-intersection counts."""
    from .groups import subgroup_sphere_counts
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    counts = subgroup_sphere_counts(group, subgroup, max(ns))
    return [(n, counts[n], math.log(counts[n]) / n if counts[n] else -math.inf) for n in ns]
