import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slotjudge.metrics import (
    EvalReport,
    MetricsError,
    compute_accuracies,
    compute_error_rank,
)


def test_worked_example():
    preds = [["yes", "no", "no"], ["yes", "yes", "yes"]]
    golds = [["yes", "no", "yes"], ["yes", "yes", "yes"]]
    r = compute_accuracies(preds, golds)
    assert r.acc_property == pytest.approx(5 / 6)
    assert r.acc_sample == pytest.approx(1 / 2)
    assert r.per_position_accuracy == [1.0, 1.0, 0.5]
    assert r.n_samples == 2 and r.n_properties == 6
    assert r.acc_dep is None


def test_dependency_slots_scored_separately():
    preds = [["yes", "no"], ["no", "no"]]
    golds = [["yes", "yes"], ["no", "yes"]]
    kinds = [["literal", "dependency"], ["literal", "dependency"]]
    r = compute_accuracies(preds, golds, kinds)
    assert r.acc_dep == 0.0
    assert r.acc_property == pytest.approx(0.5)


def test_all_correct_and_all_wrong():
    preds = [["yes"] * 4]
    assert compute_accuracies(preds, preds).acc_sample == 1.0
    r = compute_accuracies(preds, [["no"] * 4])
    assert r.acc_property == 0.0 and r.acc_sample == 0.0


def test_variable_length_samples():
    preds = [["yes"], ["yes", "no", "yes"]]
    golds = [["yes"], ["no", "no", "yes"]]
    r = compute_accuracies(preds, golds)
    assert r.per_position_accuracy == [0.5, 1.0, 1.0]
    assert r.n_properties == 4


def test_misalignment_errors():
    with pytest.raises(MetricsError):
        compute_accuracies([["yes"]], [["yes"], ["no"]])
    with pytest.raises(MetricsError):
        compute_accuracies([["yes", "no"]], [["yes"]])
    with pytest.raises(MetricsError):
        compute_accuracies([], [])


def test_report_invariant_enforced():
    with pytest.raises(AssertionError):
        EvalReport(acc_property=0.5, acc_sample=0.9)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 8).flatmap(
        lambda width: st.lists(
            st.lists(st.booleans(), min_size=width, max_size=width),
            min_size=1,
            max_size=10,
        )
    )
)
def test_sample_accuracy_never_exceeds_property_accuracy(correct_grid):
    # holds whenever every sample carries the same number of requirements
    preds = [["yes"] * len(row) for row in correct_grid]
    golds = [["yes" if ok else "no" for ok in row] for row in correct_grid]
    r = compute_accuracies(preds, golds)
    assert r.acc_sample <= r.acc_property + 1e-12
    # position-wise accuracies average (weighted) back to acc_property
    total = sum(len(row) for row in correct_grid)
    weighted = sum(
        acc * sum(1 for row in correct_grid if len(row) > pos)
        for pos, acc in enumerate(r.per_position_accuracy)
    )
    assert weighted / total == pytest.approx(r.acc_property)


def test_error_rank_examples():
    assert compute_error_rank(["first", "second"], ["first", "second"]) == 0.0
    assert compute_error_rank(["first", "second"], ["second", "first"]) == 1.0
    assert compute_error_rank(["first", "first"], ["first", "second"]) == 0.5


def test_error_rank_requires_pairs():
    with pytest.raises(MetricsError):
        compute_error_rank([], [])
    with pytest.raises(MetricsError):
        compute_error_rank(["first"], [])


def test_error_rank_random_guessing_near_half():
    rng = random.Random(0)
    n = 20_000
    preds = [rng.choice(["first", "second"]) for _ in range(n)]
    labels = [rng.choice(["first", "second"]) for _ in range(n)]
    assert compute_error_rank(preds, labels) == pytest.approx(0.5, abs=0.02)
