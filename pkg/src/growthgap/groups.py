"""Finitely generated groups as multiplication oracles, with word-metric geometry.

Elements are hashable Python values whose form depends on the backend:
reduced letter tuples for free groups, integers for finite tables and pairs
for direct products.  Every enumeration is ShortLex over the generator order.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from .config import element_budget
from .errors import ConsistencyError, ResourceError, ValidationError


class GeneratorSet:
    """Symmetric generating set with an involution and a total order."""

    def __init__(self, letters, inverse, order=None):
        letters = tuple(letters)
        inverse = dict(inverse)
        if len(set(letters)) != len(letters):
            raise ValidationError(f"duplicate generator letters in {letters}")
        if set(inverse) != set(letters):
            raise ValidationError("involution must be defined exactly on the letters")
        for a in letters:
            if inverse[inverse[a]] != a:
                raise ValidationError(f"involution is not self-inverse at {a!r}")
        order = letters if order is None else tuple(order)
        if sorted(order) != sorted(letters) or len(order) != len(letters):
            raise ValidationError(f"order {order} is not a permutation of {letters}")
        self.letters = letters
        self.order = order
        self._inverse = inverse
        self.rank = {a: i for i, a in enumerate(order)}

    def inv(self, a):
        return self._inverse[a]

    def invert_word(self, word):
        return tuple(self._inverse[a] for a in reversed(word))

    def with_order(self, order):
        return GeneratorSet(self.letters, self._inverse, order)

    def key(self, word):
        return tuple(self.rank[a] for a in word)

    def shortlex_key(self, word):
        return (len(word), self.key(word))

    def tokenize(self, text):
        """Split a string such as 'abA' or 't1a' into letters (greedy longest match)."""
        text = text.strip()
        if text in ("", "1", "e") and text not in self.rank:
            return ()
        by_len = sorted(self.letters, key=len, reverse=True)
        out = []
        i = 0
        while i < len(text):
            for a in by_len:
                if text.startswith(a, i):
                    out.append(a)
                    i += len(a)
                    break
            else:
                raise ValidationError(f"cannot parse {text!r}: unknown symbol at position {i}")
        return tuple(out)

    def __len__(self):
        return len(self.letters)

    def __eq__(self, other):
        return (isinstance(other, GeneratorSet) and self.letters == other.letters
                and self.order == other.order and self._inverse == other._inverse)

    def __hash__(self):
        return hash((self.letters, self.order))

    def __repr__(self):
        return f"GeneratorSet(order={''.join(self.order) if all(len(a) == 1 for a in self.order) else self.order})"


class Group:
    """Base class for group oracles.

    Subclasses provide mul, inv, gen, length, word, sphere_counts and the
    abelianization data used by the kernel subgroups.
    """

    backend = "abstract"
    spec = "?"
    identity = None
    gens: GeneratorSet

    def act(self, x, a):
        return self.mul(x, self.gen(a))

    def from_word(self, word):
        x = self.identity
        for a in word:
            x = self.act(x, a)
        return x

    def normal_form(self, word):
        """Canonical geodesic word of the element spelled by `word`."""
        return self.word(self.from_word(word))

    def parse(self, text):
        return self.from_word(self.gens.tokenize(text))

    def format(self, x):
        w = self.word(x)
        return "".join(w) if w else "1"

    def key(self, x):
        w = self.word(x)
        return (len(w), self.gens.key(w))

    def distance(self, x, y):
        return self.length(self.mul(self.inv(x), y))

    def exact_growth_rate(self):
        return None

    def with_order(self, order):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec} order={self.gens.order}>"


class FreeGroup(Group):
    backend = "free"

    def __init__(self, k, order=None, first=0):
        if not 0 <= k or k + first > 26:
            raise ValidationError(f"free:k needs 0 <= k <= 26, got {k}")
        self.k = k
        self.first = first
        letters = []
        inverse = {}
        for j in range(first, first + k):
            lo, up = chr(ord("a") + j), chr(ord("A") + j)
            letters += [lo, up]
            inverse[lo], inverse[up] = up, lo
        self.gens = GeneratorSet(letters, inverse, order)
        self.identity = ()
        self.spec = f"free:{k}"

    def with_order(self, order):
        return FreeGroup(self.k, order, self.first)

    def gen(self, a):
        if a not in self.gens.rank:
            raise ValidationError(f"unknown generator {a!r} for {self.spec}")
        return (a,)

    def act(self, x, a):
        if x and x[-1] == self.gens.inv(a):
            return x[:-1]
        return x + (a,)

    def mul(self, x, y):
        i = 0
        n = min(len(x), len(y))
        inv = self.gens.inv
        while i < n and x[len(x) - 1 - i] == inv(y[i]):
            i += 1
        return x[:len(x) - i] + y[i:]

    def inv(self, x):
        return self.gens.invert_word(x)

    def length(self, x):
        return len(x)

    def word(self, x):
        return x

    def sphere_counts(self, r):
        q = 2 * self.k
        counts = [1]
        for n in range(1, r + 1):
            counts.append(q if n == 1 else counts[-1] * (q - 1))
        return counts

    def exact_growth_rate(self):
        return math.log(2 * self.k - 1) if self.k >= 1 else 0.0

    def coornaert_constant(self):
        """sup_r |B(r)| e^{-omega r} in closed form."""
        if self.k <= 1:
            return None
        return self.k / (self.k - 1)

    # abelianization Z^k
    def ab_moduli(self):
        return (0,) * self.k

    def ab_letter(self, a):
        j = ord(a.lower()) - ord("a") - self.first
        v = [0] * self.k
        v[j] = 1 if a.islower() else -1
        return tuple(v)


class FiniteGroup(Group):
    """Finite group from a multiplication table; element 0 is the identity."""

    backend = "finite"

    def __init__(self, table, gen_elements, gen_names, spec, names=None, order=None,
                 abelian_moduli=None, ab_values=None):
        self.table = [list(row) for row in table]
        n = len(self.table)
        if any(len(row) != n for row in self.table):
            raise ValidationError("multiplication table must be square")
        if any(self.table[0][j] != j or self.table[j][0] != j for j in range(n)):
            raise ValidationError("element 0 must be the identity of the table")
        self.n = n
        self.names = list(names) if names is not None else [str(i) for i in range(n)]
        self._inv = []
        for x in range(n):
            ys = [y for y in range(n) if self.table[x][y] == 0]
            if len(ys) != 1:
                raise ValidationError(f"element {x} has no unique inverse")
            self._inv.append(ys[0])
        self.gen_of = dict(zip(gen_names, gen_elements))
        name_of = {g: a for a, g in self.gen_of.items()}
        inverse = {}
        for a, g in self.gen_of.items():
            ig = self._inv[g]
            if ig not in name_of:
                raise ValidationError(f"generating set is not symmetric at {a!r}")
            inverse[a] = name_of[ig]
        self.gens = GeneratorSet(list(gen_names), inverse, order)
        self.identity = 0
        self.spec = spec
        self._ab_moduli = abelian_moduli
        self._ab_values = ab_values
        self._bfs()

    def _bfs(self):
        # ShortLex geodesic words: process the frontier in ShortLex order
        words = {0: ()}
        frontier = [0]
        while frontier:
            nxt = []
            for x in frontier:
                for a in self.gens.order:
                    y = self.table[x][self.gen_of[a]]
                    if y not in words:
                        words[y] = words[x] + (a,)
                        nxt.append(y)
            frontier = nxt
        if len(words) != self.n:
            raise ValidationError(f"{self.spec}: generators do not generate the group")
        self._words = words

    def with_order(self, order):
        return FiniteGroup(self.table, list(self.gen_of.values()), list(self.gen_of.keys()),
                           self.spec, self.names, order, self._ab_moduli, self._ab_values)

    def gen(self, a):
        if a not in self.gen_of:
            raise ValidationError(f"unknown generator {a!r} for {self.spec}")
        return self.gen_of[a]

    def mul(self, x, y):
        return self.table[x][y]

    def act(self, x, a):
        return self.table[x][self.gen(a)]

    def inv(self, x):
        return self._inv[x]

    def length(self, x):
        return len(self._words[x])

    def word(self, x):
        return self._words[x]

    def sphere_counts(self, r):
        counts = [0] * (r + 1)
        for w in self._words.values():
            if len(w) <= r:
                counts[len(w)] += 1
        return counts

    def exact_growth_rate(self):
        return 0.0

    def ab_moduli(self):
        if self._ab_moduli is None:
            from .errors import UnsupportedSubgroupError
            raise UnsupportedSubgroupError(f"no abelianization data for {self.spec}")
        return self._ab_moduli

    def ab_letter(self, a):
        self.ab_moduli()
        return self._ab_values[self.gen(a)]


def cyclic_group(n, order=None):
    if n < 1:
        raise ValidationError(f"cyclic:n needs n >= 1, got {n}")
    table = [[(i + j) % n for j in range(n)] for i in range(n)]
    elems = list(range(1, n))
    names = ["t"] if n == 2 else [f"t{i}" for i in elems]
    return FiniteGroup(table, elems, names, f"cyclic:{n}", ["1"] + names, order,
                       abelian_moduli=(n,), ab_values=[(i,) for i in range(n)])


def table_group(path, order=None):
    with open(path) as fh:
        data = json.load(fh)
    try:
        names = data["elements"]
        table = data["table"]
        gens = data["generators"]
    except KeyError as exc:
        raise ValidationError(f"group table file {path} lacks key {exc}")
    idx = {name: i for i, name in enumerate(names)}
    return FiniteGroup(table, [idx[g] for g in gens], gens, f"table:{path}", names, order)


class DirectProduct(Group):
    """G1 x G2 with the union of the factor generating sets (word length adds)."""

    backend = "product"

    def __init__(self, left, right, order=None):
        clash = set(left.gens.letters) & set(right.gens.letters)
        if clash:
            raise ValidationError(f"factor generator names clash: {sorted(clash)}")
        letters = left.gens.letters + right.gens.letters
        inverse = {a: left.gens.inv(a) for a in left.gens.letters}
        inverse.update({a: right.gens.inv(a) for a in right.gens.letters})
        self.gens = GeneratorSet(letters, inverse, order)
        lset = set(left.gens.letters)
        self.left = left.with_order([a for a in self.gens.order if a in lset])
        self.right = right.with_order([a for a in self.gens.order if a not in lset])
        self._in_left = lset
        self.identity = (self.left.identity, self.right.identity)
        self.spec = f"product({left.spec},{right.spec})"

    def with_order(self, order):
        return DirectProduct(self.left, self.right, order)

    def gen(self, a):
        if a in self._in_left:
            return (self.left.gen(a), self.right.identity)
        return (self.left.identity, self.right.gen(a))

    def act(self, x, a):
        if a in self._in_left:
            return (self.left.act(x[0], a), x[1])
        return (x[0], self.right.act(x[1], a))

    def mul(self, x, y):
        return (self.left.mul(x[0], y[0]), self.right.mul(x[1], y[1]))

    def inv(self, x):
        return (self.left.inv(x[0]), self.right.inv(x[1]))

    def length(self, x):
        return self.left.length(x[0]) + self.right.length(x[1])

    def word(self, x):
        # the factors commute, so merge the two factor words greedily by rank
        u, v = self.left.word(x[0]), self.right.word(x[1])
        rank = self.gens.rank
        out = []
        i = j = 0
        while i < len(u) or j < len(v):
            if j >= len(v) or (i < len(u) and rank[u[i]] < rank[v[j]]):
                out.append(u[i])
                i += 1
            else:
                out.append(v[j])
                j += 1
        return tuple(out)

    def sphere_counts(self, r):
        a, b = self.left.sphere_counts(r), self.right.sphere_counts(r)
        return [sum(a[i] * b[n - i] for i in range(n + 1)) for n in range(r + 1)]

    def exact_growth_rate(self):
        a, b = self.left.exact_growth_rate(), self.right.exact_growth_rate()
        if a is None or b is None:
            return None
        return max(a, b)

    def ab_moduli(self):
        return self.left.ab_moduli() + self.right.ab_moduli()

    def ab_letter(self, a):
        if a in self._in_left:
            return self.left.ab_letter(a) + (0,) * len(self.right.ab_moduli())
        return (0,) * len(self.left.ab_moduli()) + self.right.ab_letter(a)


def _split_top_level(text):
    depth = 0
    for i, c in enumerate(text):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "," and depth == 0:
            return text[:i], text[i + 1:]
    raise ValidationError(f"product spec needs two comma-separated factors: {text!r}")


def _fresh_letters(group, taken):
    """Rebuild a factor with generator names disjoint from `taken`."""
    if isinstance(group, FreeGroup):
        first = 1 + max(ord(a.lower()) - ord("a") for a in taken if len(a) == 1 and a.isalpha())
        return FreeGroup(group.k, None, first)
    if isinstance(group, FiniteGroup):
        suffix = "'"
        while any(a + suffix in taken for a in group.gens.letters):
            suffix += "'"
        names = [a + suffix for a in group.gen_of]
        return FiniteGroup(group.table, list(group.gen_of.values()), names, group.spec,
                           None, None, group._ab_moduli, group._ab_values)
    raise ValidationError(f"cannot rename the generators of {group.spec}")


def parse_group(spec, order=None):
    """Parse the group mini-language: free:k, cyclic:n, product(G,H), table:<file>."""
    if not isinstance(spec, str):
        raise ValidationError(f"group spec must be a string, got {spec!r}")
    s = spec.strip()
    m = re.fullmatch(r"free:(\d+)", s)
    if m:
        group = FreeGroup(int(m.group(1)))
    elif (m := re.fullmatch(r"cyclic:(\d+)", s)):
        group = cyclic_group(int(m.group(1)))
    elif s.startswith("product(") and s.endswith(")"):
        left, right = _split_top_level(s[len("product("):-1])
        left, right = parse_group(left), parse_group(right)
        if set(left.gens.letters) & set(right.gens.letters):
            right = _fresh_letters(right, set(left.gens.letters))
        group = DirectProduct(left, right)
    elif s.startswith("table:"):
        group = table_group(s[len("table:"):])
    else:
        raise ValidationError(f"malformed group spec {spec!r}")
    if order is not None:
        if isinstance(order, str):
            order = group.gens.tokenize(order.replace(",", "").replace(" ", "").replace("<", ""))
        group = group.with_order(order)
    return group


# -- balls and growth ---------------------------------------------------------

def enumerate_spheres(group, r):
    """Spheres S(0..r) by BFS, each sorted ShortLex."""
    spheres = [(group.identity,)]
    prev, cur = set(), {group.identity}
    order = group.gens.order
    act = group.act
    for _ in range(r):
        new = set()
        for x in spheres[-1]:
            for a in order:
                y = act(x, a)
                if y not in cur and y not in prev:
                    new.add(y)
        spheres.append(tuple(sorted(new, key=group.key)))
        prev, cur = cur, new
    return spheres


@dataclass(frozen=True, eq=False)
class BallTable:
    group: Group
    radius: int
    sizes: tuple            # exact |S(n)|, n = 0..radius
    spheres: tuple          # materialized S(0..materialized_radius)
    delta: float = 1.0

    @property
    def materialized_radius(self):
        return len(self.spheres) - 1

    @property
    def elements_by_distance(self):
        return self.spheres

    def ball_size(self, r):
        return sum(self.sizes[:r + 1])

    def sphere(self, n):
        if n > self.materialized_radius:
            raise ResourceError(
                f"sphere S({n}) of {self.group.spec} ({self.sizes[n]} elements) was not "
                f"materialized within the memory budget")
        return self.spheres[n]

    def ball(self, r):
        out = []
        for n in range(r + 1):
            out.extend(self.sphere(n))
        return out


def ball(group, r, delta=1.0, materialize=None):
    """Exact sphere counts to radius r; element sets up to the memory budget.

    `materialize` forces a materialization radius (ResourceError if the budget
    cannot hold it); by default as many spheres as fit are materialized.
    """
    if r < 0:
        raise ValidationError(f"radius must be >= 0, got {r}")
    if not delta > 0:
        raise ValidationError(f"shell width delta must be positive, got {delta}")
    sizes = group.sphere_counts(r)
    budget = element_budget()
    total = 0
    fit = -1
    for n, s in enumerate(sizes):
        total += s
        if total > budget:
            break
        fit = n
    if materialize is None:
        target = fit
    else:
        if materialize > r:
            raise ValidationError("materialization radius exceeds the table radius")
        if materialize > fit:
            raise ResourceError(
                f"memory budget exceeded at sphere S({fit + 1}) of {group.spec}: "
                f"|B({fit + 1})| = {sum(sizes[:fit + 2])} elements > budget {budget}")
        target = materialize
    spheres = enumerate_spheres(group, max(target, 0))
    for n, sph in enumerate(spheres):
        if len(sph) != sizes[n]:
            raise ConsistencyError(f"BFS sphere S({n}) has {len(sph)} elements, counts say {sizes[n]}")
    return BallTable(group, r, tuple(sizes), tuple(spheres), delta)


@dataclass(frozen=True)
class GrowthEstimate:
    radii: tuple
    ball_sizes: tuple
    log_ball_over_r: tuple     # (1/r) ln|B(r)|
    ratio_estimates: tuple     # ln(|B(r)|/|B(r-1)|)
    omega_hat: float
    c1_hat: float
    subexponential: bool


def growth_rate(table):
    """Growth-rate estimate from a ball table.

    ω̂ is the ratio estimate ln(|B(r)|/|B(r-1)|) at the final radius, which
    converges much faster than (1/r)ln|B(r)| when the growth series is rational.
    """
    if table.radius < 2:
        raise ValidationError("growth_rate needs a table of radius >= 2")
    bs = [table.ball_size(r) for r in range(table.radius + 1)]
    radii = tuple(range(1, table.radius + 1))
    logs = tuple(math.log(bs[r]) / r for r in radii)
    ratios = tuple(math.log(bs[r] / bs[r - 1]) for r in radii)
    r = table.radius
    omega = ratios[-1]
    flat = omega <= 1e-12
    if not flat and r >= 4:
        # polynomial growth keeps r*ratio_r bounded, exponential growth makes it linear
        half = r // 2
        flat = r * ratios[r - 1] < 1.5 * half * ratios[half - 1]
    if flat:
        omega = 0.0
    c1 = max(bs[k] * math.exp(-omega * k) for k in range(r + 1))
    return GrowthEstimate(radii, tuple(bs[1:]), logs, ratios, omega, c1, flat)


def gromov_product(group, x, y, z):
    """⟨x, y⟩_z as an exact half-integer."""
    d = group.distance
    return Fraction(d(x, z) + d(y, z) - d(x, y), 2)


# -- subgroups and Schreier graphs -------------------------------------------

class Subgroup:
    """A subgroup H described by its right coset action on labels."""

    spec = "?"

    def __init__(self, group):
        self.group = group

    def act(self, label, a):
        raise NotImplementedError

    def label_of(self, g):
        y = self.base
        for a in self.group.word(g):
            y = self.act(y, a)
        return y

    def contains(self, g):
        return self.label_of(g) == self.base


class TrivialSubgroup(Subgroup):
    spec = "trivial"

    def __init__(self, group):
        super().__init__(group)
        self.base = group.identity

    def act(self, label, a):
        return self.group.act(label, a)

    def label_of(self, g):
        return g


class WholeSubgroup(Subgroup):
    spec = "whole"
    base = ()

    def act(self, label, a):
        return ()


class AbelianKernel(Subgroup):
    """Kernel of the exponent-sum map to Z^k (or to (Z/k)^k when modulus is set)."""

    def __init__(self, group, modulus=None):
        super().__init__(group)
        moduli = group.ab_moduli()
        if modulus is not None:
            if modulus < 1:
                raise ValidationError("ker-mod:k needs k >= 1")
            moduli = tuple(modulus if m == 0 else math.gcd(m, modulus) for m in moduli)
            self.spec = f"ker-mod:{modulus}"
        else:
            self.spec = "ker-ab"
        self.moduli = moduli
        self.base = (0,) * len(moduli)
        self._shift = {a: group.ab_letter(a) for a in group.gens.letters}

    def act(self, label, a):
        s = self._shift[a]
        return tuple((x + d) % m if m else x + d for x, d, m in zip(label, s, self.moduli))


class TableSubgroup(Subgroup):
    """Finite-index subgroup given by its permutation action on cosets."""

    def __init__(self, group, path):
        super().__init__(group)
        with open(path) as fh:
            data = json.load(fh)
        n = int(data["cosets"])
        self.base = int(data.get("base", 0))
        action = {a: list(map(int, p)) for a, p in data["action"].items()}
        if set(action) != set(group.gens.letters):
            raise ValidationError("coset table must give an action for every generator")
        for a, perm in action.items():
            if sorted(perm) != list(range(n)):
                raise ValidationError(f"action of {a!r} is not a permutation of {n} cosets")
            back = action[group.gens.inv(a)]
            if any(back[perm[i]] != i for i in range(n)):
                raise ValidationError(f"actions of {a!r} and its inverse are not inverse")
        self.action = action
        self.n_cosets = n
        self.spec = f"table:{path}"

    def act(self, label, a):
        return self.action[a][label]


def parse_subgroup(spec, group):
    s = spec.strip()
    if s == "trivial":
        return TrivialSubgroup(group)
    if s == "whole":
        return WholeSubgroup(group)
    if s == "ker-ab":
        return AbelianKernel(group)
    m = re.fullmatch(r"ker-mod:(\d+)", s)
    if m:
        return AbelianKernel(group, int(m.group(1)))
    if s.startswith("table:"):
        return TableSubgroup(group, s[len("table:"):])
    raise ValidationError(f"malformed subgroup spec {spec!r}")


BOUNDARY = -1


class SchreierGraph:
    """Cosets within distance R of y0 = H; exterior edges point at BOUNDARY.

    Vertices are numbered in BFS order (letters in generator order).  Coset
    labels are kept either explicitly or as parent pointers, in which case
    they are rebuilt on first use.
    """

    def __init__(self, subgroup, radius, letters, dist, nbr, labels=None, parent=None, via=None):
        self.subgroup = subgroup
        self.radius = radius
        self.letters = tuple(letters)
        self.dist = dist
        self.nbr = nbr
        self._labels = labels
        self._parent = parent
        self._via = via

    @property
    def n_vertices(self):
        return len(self.dist)

    @cached_property
    def column(self):
        return {a: i for i, a in enumerate(self.letters)}

    @cached_property
    def labels(self):
        if self._labels is not None:
            return tuple(self._labels)
        out = [self.subgroup.base]
        act = self.subgroup.act
        for v in range(1, self.n_vertices):
            out.append(act(out[self._parent[v]], self.letters[self._via[v]]))
        return tuple(out)

    @cached_property
    def index(self):
        return {y: i for i, y in enumerate(self.labels)}

    def follow(self, v, word):
        for a in word:
            if v == BOUNDARY:
                return BOUNDARY
            v = int(self.nbr[v, self.column[a]])
        return v

    def follow_all(self, word, start=None):
        """Vertex reached along `word` from every vertex (or from `start`)."""
        import numpy as np
        v = np.arange(self.n_vertices) if start is None else np.asarray(start)
        for a in word:
            col = self.nbr[:, self.column[a]]
            v = np.where(v == BOUNDARY, BOUNDARY, col[np.maximum(v, 0)])
        return v

    def sphere_sizes(self):
        import numpy as np
        return np.bincount(self.dist, minlength=self.radius + 1)

    def __repr__(self):
        return (f"<SchreierGraph {self.subgroup.group.spec} / {self.subgroup.spec}, "
                f"R={self.radius}, {self.n_vertices} cosets>")


def _tree_ball(group, subgroup, R, budget):
    # Cayley ball of a free group, built sphere by sphere with numpy
    import numpy as np
    letters = group.gens.order
    L = len(letters)
    col = {a: i for i, a in enumerate(letters)}
    invcol = np.array([col[group.gens.inv(a)] for a in letters])
    total = sum(group.sphere_counts(R))
    if total > budget:
        raise ResourceError(f"Schreier ball of radius {R} has {total} cosets, over the budget {budget}")
    parent = np.zeros(total, dtype=np.int64)
    via = np.full(total, -1, dtype=np.int64)
    dist = np.zeros(total, dtype=np.int64)
    nbr = np.full((total, L), BOUNDARY, dtype=np.int64)
    nxt_cols = np.array([[c for c in range(L) if c != invcol[l]] for l in range(L)], dtype=np.int64)
    lo, hi = 0, 1
    for d in range(R):
        vs = np.arange(lo, hi)
        if d == 0:
            par = np.zeros(L, dtype=np.int64)
            cols = np.arange(L)
        else:
            par = np.repeat(vs, L - 1)
            cols = nxt_cols[via[vs]].ravel()
        kids = np.arange(hi, hi + len(par))
        parent[kids] = par
        via[kids] = cols
        dist[kids] = d + 1
        nbr[par, cols] = kids
        nbr[kids, invcol[cols]] = par
        lo, hi = hi, hi + len(par)
    return SchreierGraph(subgroup, R, letters, dist, nbr, parent=parent, via=via)


def schreier_ball(group, subgroup, R):
    """Truncated Schreier graph H\\G of radius R around the base coset."""
    import numpy as np
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    if R < 0:
        raise ValidationError("truncation radius must be >= 0")
    budget = element_budget()
    if isinstance(group, FreeGroup) and isinstance(subgroup, TrivialSubgroup) and group.k > 0:
        return _tree_ball(group, subgroup, R, budget)
    letters = group.gens.order
    labels = [subgroup.base]
    index = {subgroup.base: 0}
    dist = [0]
    rows = []
    act = subgroup.act
    v = 0
    while v < len(labels):
        y, d = labels[v], dist[v]
        row = []
        for a in letters:
            t = act(y, a)
            j = index.get(t)
            if j is None:
                if d < R:
                    j = len(labels)
                    index[t] = j
                    labels.append(t)
                    dist.append(d + 1)
                    if j >= budget:
                        raise ResourceError(
                            f"Schreier ball exceeds memory budget while building sphere {d + 1} "
                            f"(> {budget} cosets)")
                else:
                    j = BOUNDARY
            row.append(j)
        rows.append(row)
        v += 1
    nbr = np.array(rows, dtype=np.int64).reshape(len(labels), len(letters))
    graph = SchreierGraph(subgroup, R, letters, np.array(dist, dtype=np.int64), nbr, labels=labels)
    graph.__dict__["index"] = index
    return graph


def subgroup_sphere_counts(group, subgroup, n_max):
    """Exact |S(n) ∩ H| for n = 0..n_max.

    Free groups use a DP over (coset label, last letter) of reduced words;
    other backends count a materialized ball.
    """
    if isinstance(subgroup, str):
        subgroup = parse_subgroup(subgroup, group)
    if isinstance(subgroup, TrivialSubgroup):
        return [1] + [0] * n_max
    if isinstance(subgroup, WholeSubgroup):
        return group.sphere_counts(n_max)
    if isinstance(group, FreeGroup):
        inv = group.gens.inv
        states = {(subgroup.base, None): 1}
        counts = [1]
        for _ in range(n_max):
            nxt = {}
            for (y, last), c in states.items():
                for a in group.gens.order:
                    if last is not None and a == inv(last):
                        continue
                    key = (subgroup.act(y, a), a)
                    nxt[key] = nxt.get(key, 0) + c
            states = nxt
            counts.append(sum(c for (y, _), c in states.items() if y == subgroup.base))
        return counts
    table = ball(group, n_max, materialize=n_max)
    return [sum(1 for g in table.sphere(n) if subgroup.contains(g)) for n in range(n_max + 1)]
