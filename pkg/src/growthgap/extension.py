"""Group extensions of a shift by a locally constant label, and visibility."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InsufficientPrefixError, ValidationError
from .groups import ball


@dataclass(frozen=True)
class LabellingMap:
    depth: int
    table: dict       # admissible depth-m word -> group element

    def __call__(self, word):
        return self.table[tuple(word[:self.depth])]


class ExtensionSystem:
    """(Σ_θ, σ_θ): σ_θ(x, g) = (σx, g·θ(x))."""

    def __init__(self, sft, labelling, group):
        self.sft = sft
        self.labelling = labelling
        self.group = group
        m = labelling.depth
        if m < 1:
            raise ValidationError("labelling depth must be >= 1")
        missing = [w for w in sft.admissible_words(m) if w not in labelling.table]
        if missing:
            raise ValidationError(f"labelling undefined on admissible words {missing[:5]}")

    @classmethod
    def from_json(cls, sft, theta, group):
        """Labelling from the SFT JSON `theta` block {"<word>": "<group word>"}."""
        table = {sft.word(k): group.parse(v) for k, v in theta.items()}
        depths = {len(k) for k in table}
        if len(depths) != 1:
            raise ValidationError("theta keys must all have the same length")
        return cls(sft, LabellingMap(depths.pop(), table), group)

    def restrict(self, component_sft):
        table = {w: self.labelling.table[w] for w in component_sft.admissible_words(self.labelling.depth)}
        return ExtensionSystem(component_sft, LabellingMap(self.labelling.depth, table), self.group)

    def step(self, prefix, g):
        return prefix[1:], self.group.mul(g, self.labelling(prefix))

    def theta_json(self):
        return {self.sft.format(w): self.group.format(g)
                for w, g in sorted(self.labelling.table.items(), key=lambda kv: self.sft.key(kv[0]))}


def cocycle(ext, prefix, n):
    """θ_n(x) = θ(x)θ(σx)···θ(σ^{n-1}x) from a finite prefix of x."""
    prefix = ext.sft.word(prefix)
    m = ext.labelling.depth
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n == 0:
        return ext.group.identity
    if len(prefix) < n + m - 1:
        raise InsufficientPrefixError(
            f"θ_{n} needs a prefix of length >= {n + m - 1}, got {len(prefix)}")
    if not ext.sft.is_admissible(prefix):
        raise ValidationError(f"prefix {ext.sft.format(prefix)} is not admissible")
    g = ext.group.identity
    for i in range(n):
        g = ext.group.mul(g, ext.labelling.table[prefix[i:i + m]])
    return g


def reach_table(ext, n_max):
    """For n = 0..n_max, map θ_n value -> ShortLex-least admissible prefix realizing it.

    Prefixes have length n + s with s = max(m_θ, N) - 1.
    """
    sft, group = ext.sft, ext.group
    m, N = ext.labelling.depth, sft.memory
    s = max(m, N) - 1
    start = sft.admissible_words(s) if s > 0 else [()]
    states = {}
    for w in start:
        states.setdefault((w, group.identity), w)
    table = [{}]
    for (suffix, g), w in states.items():
        table[0].setdefault(g, w)
    level = sorted(states.items(), key=lambda kv: sft.key(kv[1]))
    for n in range(1, n_max + 1):
        nxt = {}
        for (suffix, g), w in level:
            for c in sft.alphabet:
                block = suffix + (c,)
                if not sft.is_admissible(block[len(block) - N:] if len(block) >= N else block):
                    continue
                g2 = group.mul(g, ext.labelling.table[block[:m]])
                key = (block[1:], g2)
                if key not in nxt:
                    nxt[key] = w + (c,)
        level = list(nxt.items())
        found = {}
        for (suffix, g), w in level:
            if g not in found:
                found[g] = w
        table.append(found)
    return table


def reachable_set(ext, n_max):
    """{n: sorted list of θ_n values} for n = 0..n_max."""
    table = reach_table(ext, n_max)
    return {n: sorted(t, key=ext.group.key) for n, t in enumerate(table)}


@dataclass(frozen=True)
class Certificate:
    g: object
    u1: object
    prefix: tuple
    n: int
    u2: object


@dataclass
class VisibilityVerdict:
    passed: bool
    U: tuple
    test_radius: int
    n_max: int
    certificates: dict = field(repr=False)
    uncovered: list

    @property
    def verdict(self):
        return "PASS" if self.passed else "FAIL"


def visibility_check(ext, U, test_radius, n_max):
    """Certify g = u1 θ_n(x) u2 for every g in B(test_radius), or list the uncovered g."""
    group = ext.group
    U = tuple(sorted(set(U), key=group.key))
    table = reach_table(ext, n_max)
    first = {}
    for n, t in enumerate(table):
        for g, w in t.items():
            if g not in first:
                first[g] = (n, w)
    certs, uncovered = {}, []
    inv = {u: group.inv(u) for u in U}
    for g in ball(group, test_radius, materialize=test_radius).ball(test_radius):
        best = None
        for i, u1 in enumerate(U):
            left = group.mul(inv[u1], g)
            for j, u2 in enumerate(U):
                hit = first.get(group.mul(left, inv[u2]))
                if hit is None:
                    continue
                n, w = hit
                rank = (n, ext.sft.key(w), i, j)
                if best is None or rank < best[0]:
                    best = (rank, Certificate(g, u1, w, n, u2))
        if best is None:
            uncovered.append(g)
        else:
            certs[g] = best[1]
    return VisibilityVerdict(not uncovered, U, test_radius, n_max, certs, uncovered)


def verify_certificate(ext, cert):
    g = ext.group
    return g.mul(g.mul(cert.u1, cocycle(ext, cert.prefix, cert.n)), cert.u2) == cert.g


def find_visibility_set(ext, test_radius, n_max, cap=3):
    """Smallest U = B(k), k <= cap, passing visibility_check; the last verdict otherwise."""
    table = ball(ext.group, cap, materialize=cap)
    verdict = None
    for k in range(cap + 1):
        verdict = visibility_check(ext, table.ball(k), test_radius, n_max)
        if verdict.passed:
            return k, verdict
    return None, verdict
