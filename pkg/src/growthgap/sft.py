"""Subshifts of finite type: admissibility, the window graph and its classes."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NoWitnessError, ValidationError


class Sft:
    """One-sided SFT given by its alphabet, memory N and allowed N-windows.

    Words are tuples of symbols.  Windows that cannot be continued forever
    are not part of the shift; they are pruned from `windows`.
    """

    def __init__(self, alphabet, memory, allowed, require_all_symbols=True):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise ValidationError("alphabet must be a nonempty list of distinct symbols")
        if int(memory) != memory or memory < 1:
            raise ValidationError(f"memory must be an integer >= 1, got {memory}")
        self.memory = N = int(memory)
        self.rank = {a: i for i, a in enumerate(self.alphabet)}
        allowed = {self.word(w) for w in allowed}
        for w in allowed:
            if len(w) != N:
                raise ValidationError(f"allowed word {w} does not have length {N}")
        if require_all_symbols:
            seen = {a for w in allowed for a in w}
            missing = [a for a in self.alphabet if a not in seen]
            if missing:
                raise ValidationError(f"symbols {missing} occur in no allowed word")
        self.allowed = frozenset(allowed)
        live = set(allowed)
        while True:
            dead = {w for w in live if not any(w[1:] + (c,) in live for c in self.alphabet)}
            if not dead:
                break
            live -= dead
        if not live:
            raise ValidationError("the shift is empty: no allowed window extends to an infinite sequence")
        self.windows = tuple(sorted(live, key=self.key))
        self._live = frozenset(live)
        self._prefixes = {}
        for w in self.windows:
            for k in range(N):
                self._prefixes.setdefault(w[:k], True)

    # construction helpers
    @classmethod
    def from_transitions(cls, alphabet, transitions):
        """Memory-2 shift whose allowed windows are the pairs (a, b), b in transitions[a]."""
        allowed = [(a, b) for a in alphabet for b in transitions.get(a, ())]
        return cls(alphabet, 2, allowed)

    @classmethod
    def full_shift(cls, alphabet, memory=1):
        return cls(alphabet, memory, itertools.product(alphabet, repeat=memory))

    @classmethod
    def golden_mean(cls):
        return cls(("0", "1"), 2, [("0", "0"), ("0", "1"), ("1", "0")])

    @classmethod
    def non_backtracking(cls, gens):
        """Reduced words over a GeneratorSet (forbidden windows x x^-1)."""
        letters = gens.order
        allowed = [(a, b) for a in letters for b in letters if b != gens.inv(a)]
        return cls(letters, 2, allowed)

    # words
    def word(self, w):
        if isinstance(w, str):
            if all(len(a) == 1 for a in self.alphabet):
                w = tuple(w)
            else:
                w = _tokenize(w, self.alphabet)
        w = tuple(w)
        for a in w:
            if a not in self.rank:
                raise ValidationError(f"unknown symbol {a!r}")
        return w

    def key(self, w):
        return (len(w), tuple(self.rank[a] for a in w))

    def format(self, w):
        sep = "" if all(len(a) == 1 for a in self.alphabet) else " "
        return sep.join(w)

    def is_admissible(self, w):
        w = self.word(w)
        N = self.memory
        if len(w) < N:
            return w in self._prefixes
        for i in range(len(w) - N + 1):
            if w[i:i + N] not in self._live:
                return False
        return True

    def successors(self, window):
        return [window[1:] + (c,) for c in self.alphabet if window[1:] + (c,) in self._live]

    def admissible_words(self, length):
        """All admissible words of the given length, ShortLex ordered."""
        N = self.memory
        if length < N:
            return sorted({w[:length] for w in self.windows}, key=self.key)
        words = list(self.windows)
        for _ in range(length - N):
            nxt = []
            for w in words:
                tail = w[len(w) - N + 1:]
                for c in self.alphabet:
                    if tail + (c,) in self._live:
                        nxt.append(w + (c,))
            words = nxt
        return words

    def count_words(self, length):
        N = self.memory
        if length < N:
            return len(self.admissible_words(length))
        idx = {w: i for i, w in enumerate(self.windows)}
        v = np.ones(len(self.windows), dtype=object)
        A = self.adjacency()
        for _ in range(length - N):
            v = np.array([sum(v[j] for j in A.indices[A.indptr[i]:A.indptr[i + 1]])
                          for i in range(len(idx))], dtype=object)
        return int(sum(v))

    def adjacency(self):
        """Sparse 0/1 adjacency of the window graph (w1 -> w2 iff w1[1:] == w2[:-1])."""
        idx = {w: i for i, w in enumerate(self.windows)}
        rows, cols = [], []
        for w in self.windows:
            for s in self.successors(w):
                rows.append(idx[w])
                cols.append(idx[s])
        n = len(self.windows)
        return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    def is_irreducible(self):
        n, _ = connected_components(self.adjacency(), directed=True, connection="strong")
        return n == 1

    # serialization
    def to_json(self, theta=None):
        out = {"alphabet": list(self.alphabet), "memory": self.memory,
               "allowed": [self.format(w) for w in sorted(self.allowed, key=self.key)]}
        if theta is not None:
            out["theta"] = dict(theta)
        return out

    @classmethod
    def from_json(cls, data):
        try:
            alphabet = data["alphabet"]
            memory = data["memory"]
            allowed = data["allowed"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"SFT JSON lacks field {exc}")
        alphabet = [str(a) for a in alphabet]
        words = []
        for w in allowed:
            if isinstance(w, str):
                w = tuple(w) if all(len(a) == 1 for a in alphabet) else _tokenize(w, alphabet)
            words.append(tuple(w))
        return cls(alphabet, memory, words)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if "sft" in data:
            data = data["sft"]
        return cls.from_json(data)

    def __eq__(self, other):
        return (isinstance(other, Sft) and self.memory == other.memory
                and set(self.alphabet) == set(other.alphabet) and self._live == other._live)

    def __hash__(self):
        return hash((self.memory, self._live))

    def __repr__(self):
        return f"<Sft |A|={len(self.alphabet)} N={self.memory} windows={len(self.windows)}>"


def _tokenize(text, alphabet):
    text = text.replace(" ", "")
    by_len = sorted(alphabet, key=len, reverse=True)
    out, i = [], 0
    while i < len(text):
        for a in by_len:
            if text.startswith(a, i):
                out.append(a)
                i += len(a)
                break
        else:
            raise ValidationError(f"cannot split {text!r} into alphabet symbols")
    return tuple(out)


@dataclass(frozen=True)
class Cylinder:
    sft: Sft
    word: tuple

    def __post_init__(self):
        if not self.sft.is_admissible(self.word):
            raise ValidationError(f"cylinder word {self.word} is not admissible")

    @property
    def depth(self):
        return len(self.word)


@dataclass(frozen=True)
class Ray:
    """Eventually periodic sequence prefix + period^∞."""

    prefix: tuple
    period: tuple = ()

    def take(self, n):
        out = list(self.prefix[:n])
        if len(out) < n:
            if not self.period:
                raise ValidationError("finite ray has no symbols past its prefix")
            cyc = itertools.cycle(self.period)
            out.extend(next(cyc) for _ in range(n - len(out)))
        return tuple(out)


@dataclass(frozen=True)
class ComponentDecomposition:
    sft: Sft
    classes: tuple            # tuple of tuples of windows, sorted by first window
    dag: frozenset            # class-level condensation edges (i, j)
    nontrivial: tuple         # bool per class: carries an infinite path
    components: tuple         # restricted Sft per kept class
    component_classes: tuple  # class index of each component
    component_dag: frozenset  # reachability between kept components
    notices: tuple = field(default=())

    def class_of(self, window):
        for i, c in enumerate(self.classes):
            if window in c:
                return i
        raise KeyError(window)

    def to_json(self):
        fmt = self.sft.format
        return {
            "classes": [[fmt(w) for w in c] for c in self.classes],
            "dag": sorted([list(e) for e in self.dag]),
            "components": [{"class": ci, "sft": comp.to_json()}
                           for ci, comp in zip(self.component_classes, self.components)],
            "component_dag": sorted([list(e) for e in self.component_dag]),
            "notices": list(self.notices),
        }


def communicating_classes(sft):
    windows = sft.windows
    A = sft.adjacency()
    n, labels = connected_components(A, directed=True, connection="strong")
    groups = {}
    for w, lab in zip(windows, labels):
        groups.setdefault(lab, []).append(w)
    ordered = sorted(groups.values(), key=lambda ws: sft.key(ws[0]))
    classes = tuple(tuple(ws) for ws in ordered)
    cls_of = {w: i for i, c in enumerate(classes) for w in c}
    dag = set()
    self_loop = [False] * len(classes)
    for w in windows:
        for s in sft.successors(w):
            i, j = cls_of[w], cls_of[s]
            if i != j:
                dag.add((i, j))
            elif w == s:
                self_loop[i] = True
    nontrivial = tuple(len(c) > 1 or self_loop[i] for i, c in enumerate(classes))
    components, comp_classes, notices = [], [], []
    for i, c in enumerate(classes):
        if not nontrivial[i]:
            notices.append(f"class {i} {[sft.format(w) for w in c]} carries no infinite path; dropped")
            continue
        symbols = {a for w in c for a in w}
        alphabet = [a for a in sft.alphabet if a in symbols]
        components.append(Sft(alphabet, sft.memory, c))
        comp_classes.append(i)
    # reachability in the condensation, restricted to kept classes
    succ = {i: {j for (a, j) in dag if a == i} for i in range(len(classes))}
    reach = {}
    for i in reversed(range(len(classes))):
        r = set()
        stack = list(succ[i])
        while stack:
            j = stack.pop()
            if j not in r:
                r.add(j)
                stack.extend(succ[j])
        reach[i] = r
    pos = {ci: k for k, ci in enumerate(comp_classes)}
    comp_dag = frozenset((pos[i], pos[j]) for i in comp_classes for j in reach[i] if j in pos)
    return ComponentDecomposition(sft, classes, frozenset(dag), nontrivial, tuple(components),
                                  tuple(comp_classes), comp_dag, tuple(notices))


def irreducibility_witness(sft, w, w2):
    """Shortest (then ShortLex-least) w0 with w w0 w2 admissible."""
    w, w2 = sft.word(w), sft.word(w2)
    if not sft.is_admissible(w) or not sft.is_admissible(w2):
        raise ValidationError("witness endpoints must be admissible words")
    N = sft.memory
    level = [w]
    seen = set()
    cap = len(sft.alphabet) ** max(N - 1, 0) + N + 1
    for L in range(cap + 1):
        for u in level:
            if sft.is_admissible(u + w2):
                return u[len(w):]
        nxt = []
        for u in level:
            for c in sft.alphabet:
                v = u + (c,)
                key = (v[-(N - 1):] if N > 1 else ()) if len(v) >= N - 1 else v
                if key in seen or not sft.is_admissible(v):
                    continue
                seen.add(key)
                nxt.append(v)
        if not nxt:
            break
        level = nxt
    raise NoWitnessError(f"no connecting word from {sft.format(w)} to {sft.format(w2)}")


def connector_bound(sft):
    """K = max connector length over pairs of windows (irreducible shifts)."""
    return max(len(irreducibility_witness(sft, u, v)) for u in sft.windows for v in sft.windows)


def common_prefix_length(x, y):
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return n


def sequence_distance(x, y):
    """e^{-n}, n the common-prefix length; 0 for identical finite prefixes."""
    if tuple(x) == tuple(y):
        return 0.0
    return math.exp(-common_prefix_length(x, y))
