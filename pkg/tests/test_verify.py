import numpy as np
import pytest

from wasstime.verify import SUITES, brute_force_cost, random_measure, report_json, report_table, run_suite


@pytest.mark.parametrize("suite", SUITES)
def test_suite_passes(suite):
    rep = run_suite(suite, seed=0)
    assert rep["passed"], [c for c in rep["suites"][suite] if not c["ok"]]


def test_suite_deterministic():
    assert report_json(run_suite("targets", 11)) == report_json(run_suite("targets", 11))


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_report_table_lines():
    rep = run_suite("hjb", 1)
    lines = report_table(rep).splitlines()
    assert len(lines) == len(rep["suites"]["hjb"]) and all(line.startswith("PASS") for line in lines)


def test_brute_force_cost_identity(rng):
    mu = random_measure(rng, 5, 2)
    assert brute_force_cost(mu, mu, 2.0) == 0.0
    shifted = mu.translate(np.array([1.0, 0.0]))
    assert brute_force_cost(mu, shifted, 2.0) == pytest.approx(1.0)
