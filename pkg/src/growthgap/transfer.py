"""Locally constant potentials, Hölder data and the Ruelle transfer operator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConsistencyError, ConvergenceError, ValidationError
from .groups import DirectProduct, FiniteGroup, FreeGroup


class Potential:
    """Positive locally constant potential F given on depth-m_F words."""

    def __init__(self, depth, table, alpha=1.0, tag="custom"):
        self.depth = int(depth)
        self.table = {tuple(w): v for w, v in table.items()}
        self.alpha = float(alpha)
        self.tag = tag
        if any(len(w) != self.depth for w in self.table):
            raise ValidationError("potential table keys must all have length m_F")
        if any(not v > 0 for v in self.table.values()):
            raise ValidationError("potential values must be strictly positive")

    def __call__(self, word):
        return self.table[tuple(word[:self.depth])]

    @classmethod
    def constant(cls, sft, value, depth=1, alpha=1.0, tag="custom"):
        return cls(depth, {w: value for w in sft.admissible_words(depth)}, alpha, tag)

    @classmethod
    def case1(cls, sft, group, alpha=1.0):
        """F ≡ e^{-ω_G}, exact rational when ω_G = ln(2k-1)."""
        base = group.left if isinstance(group, DirectProduct) and isinstance(group.right, FiniteGroup) else group
        if isinstance(base, FreeGroup) and base.k >= 1:
            value = Fraction(1, 2 * base.k - 1)
        else:
            omega = group.exact_growth_rate()
            if omega is None:
                raise ValidationError(f"no exact growth rate available for {group.spec}")
            value = math.exp(-omega)
        return cls.constant(sft, value, 1, alpha, "case1-constant")

    def scaled(self, c):
        return Potential(self.depth, {w: v * c for w, v in self.table.items()}, self.alpha, self.tag)

    @property
    def is_exact(self):
        return all(isinstance(v, (int, Fraction)) for v in self.table.values())

    def log_table(self):
        return {w: math.log(v) for w, v in self.table.items()}


def cocycle_potential(sft, F, n):
    """F_n(y) = F(y)F(σy)···F(σ^{n-1}y) on depth n + m_F - 1 words."""
    d = n + F.depth - 1
    out = {}
    for w in sft.admissible_words(d):
        v = 1
        for i in range(n):
            v = v * F.table[w[i:i + F.depth]]
        out[w] = v
    return out


@dataclass(frozen=True)
class HolderData:
    alpha: float
    delta: float          # Δ_α
    delta_r: float        # Δ_{α,r}
    r: float
    sup: float            # ‖Φ‖_∞
    norm: float           # ‖Φ‖_{∞,α} = ‖Φ‖_∞ + Δ_α


def _as_matrix(table):
    words = list(table)
    vals = [np.atleast_1d(np.asarray(table[w], dtype=float)) for w in words]
    return words, np.vstack(vals) if vals else np.zeros((0, 1))


def holder_norm(table, alpha=1.0, r=1.0):
    """Exact Hölder data of a locally constant map given on words of one depth.

    Values may be scalars or vectors (ℓ² norm).  Pairs at common-prefix length
    n sit at distance e^{-n}; Δ_{α,r} keeps the pairs with e^{-n} < r.
    """
    words, V = _as_matrix(table)
    if not words:
        return HolderData(alpha, 0.0, 0.0, r, 0.0, 0.0)
    depth = {len(w) for w in words}
    if len(depth) != 1:
        raise ValidationError("holder_norm needs a table on words of a single depth")
    m = depth.pop()
    sup = float(np.max(np.linalg.norm(V, axis=1)))
    code = {a: i for i, a in enumerate(sorted({a for w in words for a in w}))}
    W = np.array([[code[a] for a in w] for w in words], dtype=np.int64).reshape(len(words), m)
    delta = delta_r = 0.0
    for i in range(len(words) - 1):
        eq = W[i + 1:] == W[i]
        lcp = np.where(eq.all(axis=1), m, np.argmin(eq, axis=1)) if m else np.zeros(len(eq), int)
        diff = np.linalg.norm(V[i + 1:] - V[i], axis=1)
        weight = diff * np.exp(alpha * lcp)
        if len(weight):
            delta = max(delta, float(weight.max()))
            close = np.exp(-lcp.astype(float)) < r
            if close.any():
                delta_r = max(delta_r, float(weight[close].max()))
    slack = 1e-12 * max(1.0, delta)
    if not (delta - 2 * r ** (-alpha) * sup - slack <= delta_r <= delta + slack):
        raise ConsistencyError("local/global Hölder sandwich violated")
    return HolderData(alpha, delta, delta_r, r, sup, sup + delta)


class TransferMatrix:
    """Matrix of ℒ on depth-m locally constant functions.

    Row w (a depth-m word) collects F(a w…)·Φ((a w)[:m]) over the letters a
    that can be glued in front of w.
    """

    def __init__(self, sft, depth, words, entries):
        self.sft = sft
        self.depth = depth
        self.words = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.entries = tuple(entries)          # (row, col, value)
        n = len(self.words)
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        vals = [float(e[2]) for e in entries]
        self.csr = csr_matrix((vals, (rows, cols)), shape=(n, n))

    @property
    def shape(self):
        return self.csr.shape

    @property
    def is_exact(self):
        return all(isinstance(e[2], (int, Fraction)) for e in self.entries)

    def apply(self, v):
        return self.csr @ np.asarray(v, dtype=float)

    def apply_exact(self, v):
        out = [Fraction(0)] * len(self.words)
        for i, j, val in self.entries:
            out[i] += val * v[j]
        return out

    def vector(self, fn):
        """Coefficient vector of a function given on words of depth <= m."""
        return np.array([fn(w) for w in self.words], dtype=float)

    def to_dense(self):
        return self.csr.toarray()


def transfer_matrix(sft, F, m=None):
    if m is None:
        m = max(sft.memory, F.depth) + 1
    if m < max(sft.memory, F.depth):
        raise ValidationError(f"depth m = {m} must be >= max(N, m_F) = {max(sft.memory, F.depth)}")
    N = sft.memory
    words = sft.admissible_words(m)
    index = {w: i for i, w in enumerate(words)}
    entries = []
    for i, w in enumerate(words):
        for a in sft.alphabet:
            y = (a,) + w
            if not sft.is_admissible(y[:N] if len(y) >= N else y):
                continue
            entries.append((i, index[y[:m]], F.table[y[:F.depth]]))
    return TransferMatrix(sft, m, words, entries)


@dataclass(frozen=True)
class SupNormSeries:
    n: tuple
    log_sup: tuple        # ln ‖ℒⁿ𝟙‖_∞
    nth_root: tuple
    ratio: tuple          # ‖ℒⁿ𝟙‖ / ‖ℒⁿ⁻¹𝟙‖
    rho_hat: float
    cauchy: bool          # estimator settled (last two values within 1e-9 relative)
    method: str           # exact | estimate

    @property
    def sup_norm(self):
        return tuple(math.exp(x) if x < 700 else math.inf for x in self.log_sup)

    def rows(self):
        return [{"n": n, "sup_norm": s, "nth_root": r}
                for n, s, r in zip(self.n, self.sup_norm, self.nth_root)]


def _log_fraction(q):
    if q == 0:
        return -math.inf
    return math.log(q.numerator) - math.log(q.denominator)


def rho_sup_norm(matrix, n_max, exact=None):
    """‖ℒⁿ𝟙‖_∞^{1/n}, n = 1..n_max, with exponent tracking."""
    if n_max < 2:
        raise ValidationError("rho_sup_norm needs n_max >= 2")
    if exact is None:
        exact = matrix.is_exact and len(matrix.words) <= 4096
    logs, roots = [], []
    if exact:
        v = [Fraction(1)] * len(matrix.words)
        for n in range(1, n_max + 1):
            v = matrix.apply_exact(v)
            ls = _log_fraction(max(v))
            logs.append(ls)
            roots.append(math.exp(ls / n))
    else:
        v = np.ones(len(matrix.words))
        acc = 0.0
        for n in range(1, n_max + 1):
            v = matrix.apply(v)
            s = float(v.max())
            if s <= 0:
                logs.append(-math.inf)
                roots.append(0.0)
                v = np.zeros_like(v)
                continue
            acc += math.log(s)
            v /= s
            logs.append(acc)
            roots.append(math.exp(acc / n))
    prev = [0.0] + logs[:-1]
    ratios = [math.exp(b - a) if a > -math.inf and b > -math.inf else 0.0
              for a, b in zip(prev, logs)]
    # the ratio converges geometrically for aperiodic data, the root only like 1/n
    settled = abs(ratios[-1] - ratios[-2]) <= 1e-9 * max(ratios[-1], 1e-300)
    rho_hat = ratios[-1] if settled else roots[-1]
    cauchy = settled or abs(roots[-1] - roots[-2]) <= 1e-9 * max(roots[-1], 1e-300)
    return SupNormSeries(tuple(range(1, n_max + 1)), tuple(logs), tuple(roots), tuple(ratios),
                         rho_hat, cauchy, "exact" if exact else "estimate")


@dataclass(frozen=True)
class PerronData:
    rho: float
    h: np.ndarray
    mu: np.ndarray
    lower: float          # Collatz–Wielandt bracket
    upper: float
    iterations: int
    residual: float


def _is_irreducible(csr):
    n, _ = connected_components(csr, directed=True, connection="strong")
    return n == 1


def _power(M, tol, max_iter):
    n = M.shape[0]
    v = np.ones(n)
    residuals = []
    for it in range(1, max_iter + 1):
        Mv = M @ v
        ratio = Mv / v
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo <= tol * hi:
            return v / v.max(), lo, hi, it
        if it % 1000 == 0:
            residuals.append(hi - lo)
        v = v + Mv
        v /= v.max()
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps", residuals)


def perron_data(matrix, tol=1e-10, max_iter=100_000):
    M = matrix.csr
    if not _is_irreducible(M):
        raise ValidationError("perron_data needs an irreducible matrix; decompose the shift first")
    h, lo, hi, it = _power(M, tol / 4, max_iter)
    mu, lo2, hi2, it2 = _power(M.T.tocsr(), tol / 4, max_iter)
    rho = 0.5 * (lo + hi)
    residual = float(np.max(np.abs(M @ h - rho * h)))
    if residual > tol * rho:
        raise ConvergenceError(f"Perron residual {residual:.3e} above tolerance", [residual])
    mu = mu / mu.sum()
    h = h / float(mu @ h)
    return PerronData(rho, h, mu, lo, hi, max(it, it2), residual)


def renormalize(F, perron, matrix):
    """F'(x) = F(x) h(x) / (ρ h(σx)), a depth m+1 potential with ℒ'𝟙 = 𝟙."""
    h = perron.h
    if not np.all(h > 0):
        raise ValidationError("renormalization needs a strictly positive eigenfunction")
    m = matrix.depth
    sft = matrix.sft
    table = {}
    for x in sft.admissible_words(m + 1):
        table[x] = float(F.table[x[:F.depth]]) * h[matrix.index[x[:m]]] / (perron.rho * h[matrix.index[x[1:m + 1]]])
    return Potential(m + 1, table, F.alpha, "renormalized")


def prop_a8_constant(sft, F, n, alpha, m_theta, sup_ln1):
    """Closed-form C_n = e^{-nα}|𝒲ⁿ|Δ_α(F_n) + 2e^{mα}‖ℒⁿ𝟙‖_∞ + 2r^{-α}, r = e^{-(N-2)}."""
    Fn = cocycle_potential(sft, F, n)
    dF = holder_norm({w: float(v) for w, v in Fn.items()}, alpha).delta
    r = math.exp(-(sft.memory - 2))
    return (math.exp(-n * alpha) * len(sft.admissible_words(n)) * dF
            + 2 * math.exp(m_theta * alpha) * sup_ln1 + 2 * r ** (-alpha))
