"""One PASS/FAIL line per acceptance criterion, A1..A15.

Run directly (python3 tests/test_acceptance.py) or under pytest, where the
lines are repeated in the terminal summary.
"""
import sys

import pytest

from growthgap.experiments import ACCEPTANCE_IDS, ExperimentConfig, run_experiment

TIME_LIMITS = {"A1": 1, "A2": 30, "A4": 10, "A5": 60, "A7": 120, "A9": 10, "A12": 300, "A15": 60}

RESULTS = {}


def run(aid):
    if aid not in RESULTS:
        rep = run_experiment(ExperimentConfig(aid))
        limit = TIME_LIMITS.get(aid)
        if limit is not None:
            rep.checks[f"wall_clock_lt_{limit}s"] = rep.wall_clock < limit
            rep.decide()
        RESULTS[aid] = rep
    return RESULTS[aid]


def line(rep):
    failed = [k for k, v in rep.checks.items() if not v]
    vals = ", ".join(f"{k}={v['value']:.6g}" for k, v in rep.values.items()
                     if isinstance(v["value"], (int, float)))
    extra = f"  failed: {', '.join(failed)}" if failed else ""
    return f"{rep.id} {rep.verdict} ({rep.wall_clock:.2f}s) {vals}{extra}"


@pytest.mark.parametrize("aid", ACCEPTANCE_IDS)
def test_acceptance(aid):
    rep = run(aid)
    print(line(rep))
    assert rep.verdict == "PASS", line(rep)


if __name__ == "__main__":
    bad = 0
    for aid in ACCEPTANCE_IDS:
        rep = run(aid)
        print(line(rep), flush=True)
        bad += rep.verdict != "PASS"
    sys.exit(2 if bad else 0)
