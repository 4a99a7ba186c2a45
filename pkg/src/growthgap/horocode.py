"""Horofunction codings of Cayley graphs with sphere embedding and cover checks.

A coding is an SFT over an alphabet of horofunction patches together with
the first-letter map θ (smallest generator on which h drops by one).  The
shift on patches realizes T h = θ(h)^{-1} h.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .errors import (InconclusiveError, NonCertifiedError, ValidationError)
from .extension import ExtensionSystem, LabellingMap, find_visibility_set
from .groups import DirectProduct, FiniteGroup, FreeGroup, ball, enumerate_spheres
from .sft import Sft, communicating_classes


@dataclass(frozen=True)
class HorofunctionPatch:
    """Restriction of an integral horofunction to a finite domain V."""

    domain: tuple        # elements, ShortLex ordered
    values: tuple        # integers aligned with domain
    params: tuple        # (R0, L0)

    @cached_property
    def as_dict(self):
        return dict(zip(self.domain, self.values))

    def __call__(self, g):
        return self.as_dict[g]

    def axiom_violations(self, group):
        """Patch axioms checked inside the domain; returns a list of messages."""
        h = self.as_dict
        bad = []
        if h.get(group.identity) != 0:
            bad.append("value at identity is not 0")
        for x, v in h.items():
            if int(v) != v:
                bad.append(f"non-integral value at {group.format(x)}")
            nbrs = [group.act(x, a) for a in group.gens.order]
            inside = [h[y] for y in nbrs if y in h]
            if any(abs(w - v) > 1 for w in inside):
                bad.append(f"not 1-Lipschitz at {group.format(x)}")
            if len(inside) == len(nbrs) and v - 1 not in inside:
                bad.append(f"no descending neighbour at {group.format(x)}")
        return bad

    def theta(self, group):
        for a in group.gens.order:
            if self.as_dict.get(group.gen(a)) == -1:
                return a
        raise ValidationError("patch has no generator with value -1")


@dataclass(eq=False)
class HoroCoding:
    group: object
    backend: str                 # exact-free | exact-free-by-finite | generic-patch
    params: tuple                # (R0, L0)
    symbols: tuple
    patches: dict                # symbol -> HorofunctionPatch
    coded_sft: Sft
    theta_table: dict            # symbol -> generator letter
    certified: bool
    certification: str
    layer: dict = field(default_factory=dict)       # symbol -> finite-layer name (free-by-finite)
    exact_state: dict = field(default_factory=dict)  # generic symbol -> exact symbol
    stabilization_radius: int | None = None
    witness: object = None

    @cached_property
    def decomposition(self):
        return communicating_classes(self.coded_sft)

    def extension(self, component=None):
        sft = self.coded_sft if component is None else _component_sft(self, component)
        table = {(s,): self.group.gen(self.theta_table[s]) for s in sft.alphabet}
        return ExtensionSystem(sft, LabellingMap(1, table), self.group)

    def to_json(self):
        g = self.group
        return {
            "group": g.spec,
            "order": list(g.gens.order),
            "backend": self.backend,
            "params": {"R0": self.params[0], "L0": self.params[1]},
            "certified": self.certified,
            "certification": self.certification,
            "sft": self.coded_sft.to_json(theta=dict(sorted(self.theta_table.items()))),
            "patches": {s: {"domain": [g.format(x) for x in p.domain], "values": list(p.values)}
                        for s, p in self.patches.items()},
        }


def _component_sft(coding, component):
    if isinstance(component, Sft):
        return component
    comps = coding.decomposition.components
    if not 0 <= component < len(comps):
        raise ValidationError(f"component index {component} out of range ({len(comps)} components)")
    return comps[component]


# -- exact backends -------------------------------------------------------------

def _free_busemann(group, ray, g):
    # h_ξ(g) = |g| - 2 lcp(g, ξ) for a reduced ray prefix ξ at least |g| long
    k = 0
    for a, b in zip(g, ray):
        if a != b:
            break
        k += 1
    return len(g) - 2 * k


def _exact_free(group):
    letters = group.gens.order
    sft = Sft.non_backtracking(group.gens)
    dom = tuple(ball(group, 1, materialize=1).ball(1))
    patches = {}
    for x in letters:
        patches[x] = HorofunctionPatch(dom, tuple(_free_busemann(group, (x,), g) for g in dom), (1, 0))
    theta = {x: x for x in letters}
    return HoroCoding(group, "exact-free", (1, 0), tuple(letters), patches, sft, theta,
                      True, "exact")


def _split_free_by_finite(group):
    if not isinstance(group, DirectProduct):
        return None
    F, B = group.left, group.right
    if isinstance(F, FreeGroup) and isinstance(B, FiniteGroup):
        return F, B
    return None


def _layer_name(B, u):
    if u == 0:
        return "1"
    return {g: a for a, g in B.gen_of.items()}[u]


def _fb_symbol(x, bname):
    return f"{x}|{bname}"


def _exact_free_by_finite(group):
    F, B = _split_free_by_finite(group)
    name_of = {g: a for a, g in B.gen_of.items()}
    missing = [b for b in range(1, B.n) if b not in name_of]
    if missing:
        raise ValidationError("the finite factor must use all non-identity elements as generators")
    rank = group.gens.rank
    fl = F.gens.order
    layers = [0] + sorted(range(1, B.n), key=lambda b: rank[name_of[b]])
    bname = {0: "1", **name_of}

    def theta(x, b):
        if b == 0 or rank[x] < rank[name_of[b]]:
            return x
        return name_of[b]

    symbols, theta_table, layer, windows = [], {}, {}, []
    for b in layers:
        for x in fl:
            s = _fb_symbol(x, bname[b])
            symbols.append(s)
            theta_table[s] = theta(x, b)
            layer[s] = bname[b]
    for b in layers:
        for x in fl:
            s = _fb_symbol(x, bname[b])
            if theta(x, b) == x:
                for y in fl:
                    if y != F.gens.inv(x):
                        windows.append((s, _fb_symbol(y, bname[b])))
            else:
                windows.append((s, _fb_symbol(x, "1")))
    sft = Sft(symbols, 2, windows)
    dom = tuple(ball(group, 1, materialize=1).ball(1))
    patches = {}
    for b in layers:
        for x in fl:
            vals = []
            for (f, u) in dom:
                vals.append(_free_busemann(F, (x,), f) + (u != b) - (b != 0))
            patches[_fb_symbol(x, bname[b])] = HorofunctionPatch(dom, tuple(vals), (1, 0))
    return HoroCoding(group, "exact-free-by-finite", (1, 0), tuple(symbols), patches, sft,
                      theta_table, True, "exact", layer=layer)


def state_of_far_element(coding, g):
    """Exact-backend symbol of the horofunction limit of c_g = d(·,g) - d(1,g) for |g| large."""
    if coding.backend == "exact-free":
        return g[0]
    if coding.backend == "exact-free-by-finite":
        f, u = g
        return _fb_symbol(f[0], _layer_name(coding.group.right, u))
    raise ValidationError("far-element states are defined for exact backends only")


def encode_horofunction(coding, ray, n, layer=None):
    """First n symbols of the coding of the horofunction (ξ = ray, layer b)."""
    ray = tuple(ray)
    if coding.backend == "exact-free":
        if len(ray) < n:
            raise ValidationError("ray prefix shorter than requested code length")
        return ray[:n]
    if coding.backend != "exact-free-by-finite":
        raise ValidationError("encode_horofunction supports exact backends only")
    b = "1" if layer is None else layer
    out = []
    i = 0
    while len(out) < n:
        if i >= len(ray):
            raise ValidationError("ray prefix too short")
        s = _fb_symbol(ray[i], b)
        out.append(s)
        if coding.theta_table[s] == ray[i]:
            i += 1
        else:
            b = "1"
    return tuple(out)


# -- generic patch backend ----------------------------------------------------

def _certified_delta(group):
    if isinstance(group, FreeGroup):
        return 0
    return None


def _generic(group, R0, L0, R_stab):
    delta = _certified_delta(group)
    if delta is not None:
        if R0 < 100 * delta + 1 or L0 < 2 * R0 + 32 * delta + 1:
            raise ValidationError(
                f"(R0, L0) = ({R0}, {L0}) violates R0 >= 100δ+1, L0 >= 2R0+32δ+1 at δ = {delta}")
    if R0 < 1:
        raise ValidationError("generic backend needs R0 >= 1 so that θ is visible in each patch")
    nbhd = ball(group, R0, materialize=R0).ball(R0)
    order = group.gens.order
    gen = {a: group.gen(a) for a in order}
    length, mul, inv = group.length, group.mul, group.inv

    def theta_of(g):
        lg = length(g)
        for a in order:
            if length(mul(inv(gen[a]), g)) == lg - 1:
                return a
        raise ValidationError("identity has no gradient letter")

    def patch_of(g):
        lg = length(g)
        seg = [group.identity]
        cur = g
        for _ in range(L0):
            a = theta_of(cur)
            seg.append(mul(seg[-1], gen[a]))
            cur = mul(inv(gen[a]), cur)
        dom = sorted({mul(s, u) for s in seg for u in nbhd}, key=group.key)
        vals = tuple(length(mul(inv(x), g)) - lg for x in dom)
        return (tuple(dom), vals)

    spheres = enumerate_spheres(group, max(L0, 1))
    prev = {patch_of(g) for g in spheres[-1]} if L0 >= 1 else None
    R = len(spheres) - 1
    stable = None
    while R < R_stab:
        R += 1
        spheres = _extend_spheres(group, spheres)
        cur = {}
        for g in spheres[R]:
            cur.setdefault(patch_of(g), []).append(g)
        if prev is not None and set(cur) == prev:
            stable = (R, cur)
            break
        prev = set(cur)
    if stable is None:
        diff = sorted(set(cur) ^ prev)[:1] if prev is not None else []
        patch = HorofunctionPatch(diff[0][0], diff[0][1], (R0, L0)) if diff else None
        raise NonCertifiedError(f"patch set still changing at R_stab = {R_stab}", patch)
    R, reps = stable
    keyed = sorted(reps.items(), key=lambda kv: min(group.key(g) for g in kv[1]))
    name = {p: f"p{i}" for i, (p, _) in enumerate(keyed)}
    symbols = tuple(name[p] for p, _ in keyed)
    patches = {name[p]: HorofunctionPatch(p[0], p[1], (R0, L0)) for p, _ in keyed}
    theta_table = {s: patches[s].theta(group) for s in symbols}
    windows = set()
    for p, gs in keyed:
        for g in gs:
            q = patch_of(mul(inv(gen[theta_of(g)]), g))
            windows.add((name[p], name[q]))
    sft = Sft(symbols, 2, windows)
    coding = HoroCoding(group, "generic-patch", (R0, L0), symbols, patches, sft, theta_table,
                        False, "uncertified", stabilization_radius=R)
    coding._reps = {name[p]: gs for p, gs in keyed}
    if delta is not None:
        coding.certified, coding.certification = True, f"certified (delta = {delta})"
    return coding


def _extend_spheres(group, spheres):
    prev = set(spheres[-2]) if len(spheres) > 1 else set()
    cur = set(spheres[-1])
    new = set()
    for x in spheres[-1]:
        for a in group.gens.order:
            y = group.act(x, a)
            if y not in cur and y not in prev:
                new.add(y)
    return spheres + [tuple(sorted(new, key=group.key))]


@dataclass
class ConjugacyWitness:
    ok: bool
    block_length: int | None
    phi: dict
    failures: list


def conjugacy_witness(generic, exact, max_block=None):
    """Check that the generic coding is conjugate to the exact one via φ = exact state.

    φ is a 1-block map; the inverse is a sliding block code of length M, found
    as the smallest M for which the first generic symbol is determined by the
    φ-image of M symbols.
    """
    failures = []
    phi = {}
    for s, gs in generic._reps.items():
        states = {state_of_far_element(exact, g) for g in gs}
        if len(states) != 1:
            failures.append(f"{s}: representatives map to several exact states {sorted(states)}")
        else:
            phi[s] = states.pop()
    if failures:
        return ConjugacyWitness(False, None, phi, failures)
    for s, e in phi.items():
        if generic.theta_table[s] != exact.theta_table[e]:
            failures.append(f"{s}: θ = {generic.theta_table[s]} but exact θ = {exact.theta_table[e]}")
    image = {(phi[a], phi[b]) for a, b in generic.coded_sft.windows}
    if image != set(exact.coded_sft.windows):
        failures.append("window images differ from the exact windows")
    if failures:
        return ConjugacyWitness(False, None, phi, failures)
    R0, L0 = generic.params
    cap = max_block or (R0 + L0 + 3)
    for M in range(1, cap + 1):
        first = {}
        ok = True
        for w in generic.coded_sft.admissible_words(M):
            img = tuple(phi[a] for a in w)
            if first.setdefault(img, w[0]) != w[0]:
                ok = False
                break
        if ok and set(first) == set(exact.coded_sft.admissible_words(M)):
            return ConjugacyWitness(True, M, phi, [])
    return ConjugacyWitness(False, None, phi, [f"no inverse block code of length <= {cap}"])


def build_coding(group, R0=1, L0=3, backend="exact", R_stab=12):
    if backend == "exact":
        if isinstance(group, FreeGroup):
            return _exact_free(group)
        if _split_free_by_finite(group):
            return _exact_free_by_finite(group)
        raise ValidationError(f"exact backend supports free:k and free:k x finite, not {group.spec}")
    if backend == "generic":
        coding = _generic(group, R0, L0, R_stab)
        if isinstance(group, FreeGroup) or _split_free_by_finite(group):
            exact = build_coding(group, backend="exact")
            coding.witness = conjugacy_witness(coding, exact)
            if coding.witness.ok:
                coding.exact_state = coding.witness.phi
                if not coding.certified:
                    coding.certified, coding.certification = True, "certified-by-comparison"
        return coding
    raise ValidationError(f"unknown backend {backend!r} (exact | generic)")


def shift_step(coding, prefix):
    """(θ(h), successor prefix) for a coded prefix of h."""
    sft = coding.coded_sft
    prefix = sft.word(prefix)
    if not prefix or not sft.is_admissible(prefix):
        raise ValidationError("shift_step needs a nonempty admissible prefix")
    return coding.theta_table[prefix[0]], prefix[1:]


# -- component selection, sphere embedding and cover -----------------------------------

@dataclass
class SelectedComponent:
    index: int
    class_index: int
    radius: int          # U = B(radius)
    U: tuple
    verdict: object
    extension: ExtensionSystem


def select_visible_component(coding, test_radius=5, n_max=None, cap=3):
    decomposition = coding.decomposition
    if n_max is None:
        n_max = test_radius + 1
    tried = []
    for i, comp in enumerate(decomposition.components):
        ext = coding.extension(comp)
        k, verdict = find_visibility_set(ext, test_radius, n_max, cap)
        if k is not None:
            return SelectedComponent(i, decomposition.component_classes[i], k, verdict.U, verdict, ext)
        tried.append((i, len(verdict.uncovered)))
    raise InconclusiveError(
        f"no component passed visibility with U <= B({cap}), radius {test_radius}, "
        f"n_max {n_max}; uncovered counts per component: {tried}")


def _theta_n(coding, word):
    g = coding.group.identity
    for s in word:
        g = coding.group.act(g, coding.theta_table[s])
    return g


def predecessor_words(coding, component, h0, n):
    """S(h0, n): length-n words w with w·h0 admissible in the component (all words if h0 is empty)."""
    sft = _component_sft(coding, component)
    h0 = sft.word(h0)
    if h0 and not sft.is_admissible(h0):
        raise ValidationError(f"h0 cylinder {sft.format(h0)} is not admissible in the component")
    if n == 0:
        return [()]
    words = sft.admissible_words(n)
    if not h0:
        return words
    return [w for w in words if sft.is_admissible(w + h0)]


@dataclass
class EmbeddingVerdict:
    n: int
    h0: tuple
    size: int
    image_size: int
    injective: bool
    lengths_ok: bool
    sphere_size: int

    @property
    def passed(self):
        return self.injective and self.lengths_ok


def sphere_embedding_check(coding, component, h0, n):
    words = predecessor_words(coding, component, h0, n)
    images = [_theta_n(coding, w) for w in words]
    group = coding.group
    return EmbeddingVerdict(n, tuple(h0), len(words), len(set(images)),
                            len(set(images)) == len(images),
                            all(group.length(g) == n for g in images),
                            group.sphere_counts(n)[n])


@dataclass
class CoverResult:
    found: tuple | None         # (R, N)
    uncovered: list

    @property
    def passed(self):
        return self.found is not None


def sphere_cover_search(coding, component, h0, n, R_max=2, N_max=2):
    """Smallest (R, N), lexicographic, with S(n) ⊆ B(R)·θ(⊔_{k=n}^{n+N} S(h0,k))·B(R)."""
    group = coding.group
    table = ball(group, max(n, R_max), materialize=max(n, R_max))
    target = table.sphere(n)
    layers = [{_theta_n(coding, w) for w in predecessor_words(coding, component, h0, k)}
              for k in range(n, n + N_max + 1)]
    uncovered = list(target)
    for R in range(R_max + 1):
        U = table.ball(R)
        inv = [group.inv(u) for u in U]
        for N in range(N_max + 1):
            image = set().union(*layers[:N + 1])
            uncovered = []
            for g in target:
                if not any(group.mul(group.mul(iu1, g), iu2) in image for iu1 in inv for iu2 in inv):
                    uncovered.append(g)
            if not uncovered:
                return CoverResult((R, N), [])
    return CoverResult(None, uncovered)
