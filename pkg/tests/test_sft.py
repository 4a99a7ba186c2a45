import itertools
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from growthgap.errors import NoWitnessError, ValidationError
from growthgap.groups import parse_group
from growthgap.sft import (Ray, Sft, common_prefix_length, communicating_classes,
                           connector_bound, irreducibility_witness, sequence_distance)

NB = Sft.non_backtracking(parse_group("free:2").gens)
GOLDEN = Sft.golden_mean()


def test_admissibility():
    assert not NB.is_admissible("aAb")
    assert NB.is_admissible("abAB")
    assert GOLDEN.is_admissible("10101")
    assert not GOLDEN.is_admissible("0110")


def test_word_counts_against_enumeration():
    for n in range(1, 7):
        brute = sum(1 for w in itertools.product("01", repeat=n) if "11" not in "".join(w))
        assert GOLDEN.count_words(n) == len(GOLDEN.admissible_words(n)) == brute


def test_reducible_example():
    sft = Sft.from_transitions(["a", "b"], {"a": ["a", "b"], "b": ["b"]})
    dec = communicating_classes(sft)
    assert [[sft.format(w) for w in c] for c in dec.classes] == [["aa"], ["ab"], ["bb"]]
    assert dec.nontrivial == (True, False, True)
    assert len(dec.components) == 2
    assert dec.component_dag == frozenset({(0, 1)})
    assert dec.notices
    with pytest.raises(NoWitnessError):
        irreducibility_witness(sft, "b", "a")


def test_witness_and_connector():
    assert irreducibility_witness(NB, "a", "A") == ("b",)
    assert NB.is_admissible(("a", "b", "A"))
    assert connector_bound(NB) == 1


def test_dead_windows_pruned():
    sft = Sft(["0", "1"], 2, ["00", "01"])
    assert [sft.format(w) for w in sft.windows] == ["00"]


def test_empty_shift_rejected():
    with pytest.raises(ValidationError):
        Sft(["0", "1"], 2, ["01"])


def test_json_round_trip(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(GOLDEN.to_json()))
    assert Sft.load(p) == GOLDEN
    data = communicating_classes(GOLDEN).to_json()
    assert json.loads(json.dumps(data)) == data


def test_ray_and_distance():
    r = Ray(("a",), ("b", "B"))
    assert r.take(4) == ("a", "b", "B", "b")
    assert common_prefix_length("abc", "abd") == 2
    assert sequence_distance("abc", "abd") == pytest.approx(math.exp(-2))


seqs = st.lists(st.sampled_from("01"), min_size=6, max_size=6).map(tuple)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs, seqs)
def test_ultrametric(x, y, z):
    d = sequence_distance
    assert d(x, z) <= max(d(x, y), d(y, z)) + 1e-15


@settings(max_examples=50, deadline=None)
@given(st.sets(st.tuples(st.sampled_from("012"), st.sampled_from("012")), min_size=1))
def test_classes_partition_windows(allowed):
    try:
        sft = Sft(["0", "1", "2"], 2, allowed, require_all_symbols=False)
    except ValidationError:
        return
    dec = communicating_classes(sft)
    flat = [w for c in dec.classes for w in c]
    assert sorted(flat) == sorted(sft.windows)
    for comp in dec.components:
        assert comp.is_irreducible()
