import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedauc.errors import DegenerateLabels, InvalidGrid, NonMonotone
from fedauc.metrics import (
    CountVector,
    DecisionGrid,
    LocalDataset,
    Sample,
    exact_auc,
    local_counts,
    make_grid,
    pair_transform,
    roc_points,
    sum_counts,
    trapezoid_auc,
)

from conftest import make_scores


# -- independent oracles ----------------------------------------------------

def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else (0.5 if a == b else 0.0)
    return wins / (len(pos) * len(neg))


def linear_scan_counts(scores, labels, thresholds):
    n = len(thresholds)
    tp, fp = [], []
    for k, th in enumerate(thresholds):
        if k == n - 1:
            tp.append(sum(1 for y in labels if y == 1))
            fp.append(sum(1 for y in labels if y == 0))
        else:
            tp.append(sum(1 for s, y in zip(scores, labels) if y == 1 and s > th))
            fp.append(sum(1 for s, y in zip(scores, labels) if y == 0 and s > th))
    return tp, fp


def direct_trapezoid(tp, fp):
    n = len(tp)
    total = 0.0
    for k in range(1, n):
        total += (tp[k] + tp[k - 1]) * (fp[k] - fp[k - 1]) / (2 * tp[n - 1] * fp[n - 1])
    return total


# -- exact_auc --------------------------------------------------------------

def test_exact_auc_perfect_separation():
    assert exact_auc([0.9, 0.9, 0.1, 0.1], [1, 1, 0, 0]) == 1.0


def test_exact_auc_all_ties():
    assert exact_auc([0.4] * 7, [1, 0, 1, 0, 0, 1, 1]) == 0.5


def test_exact_auc_matches_pairwise_oracle(rng):
    for _ in range(20):
        scores, labels = make_scores(rng, 50, separation=0.3)
        scores = np.round(scores, 2)  # force ties
        if labels.min() == labels.max():
            continue
        assert exact_auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-15)


def test_exact_auc_single_class_rejected():
    with pytest.raises(DegenerateLabels):
        exact_auc([0.1, 0.2], [1, 1])


# -- grid -------------------------------------------------------------------

def test_make_grid_small():
    assert make_grid(2).thresholds.tolist() == [1.0, 0.0]
    assert make_grid(3).thresholds.tolist() == [1.0, 0.5, 0.0]


@pytest.mark.parametrize("n", [25, 50, 100])
def test_make_grid_paper_sizes(n):
    g = make_grid(n)
    assert g.n_points == n
    assert g.thresholds[0] == 1.0 and g.thresholds[-1] == 0.0
    assert np.all(np.diff(g.thresholds) < 0)


@pytest.mark.parametrize("bad", [1, 0, -3, 2.5])
def test_make_grid_rejects(bad):
    with pytest.raises(InvalidGrid):
        make_grid(bad)


def test_grid_validation():
    with pytest.raises(InvalidGrid):
        DecisionGrid(np.array([1.0, 0.5, 0.5, 0.0]))
    with pytest.raises(InvalidGrid):
        DecisionGrid(np.array([0.9, 0.0]))


# -- local_counts -----------------------------------------------------------

def test_single_positive_sample():
    ds = LocalDataset.from_samples([Sample(0.9, 1)])
    assert local_counts(ds, make_grid(3)).tp.tolist() == [0, 1, 1]


def test_no_positives():
    ds = LocalDataset(np.array([0.2, 0.7, 0.99]), np.array([0, 0, 0]))
    c = local_counts(ds, make_grid(10))
    assert not c.tp.any()
    assert c.fp[-1] == 3


def test_empty_dataset_is_all_zero():
    ds = LocalDataset(np.array([]), np.array([]))
    c = local_counts(ds, make_grid(5))
    assert not c.tp.any() and not c.fp.any()


def test_counts_match_linear_scan(rng):
    scores, labels = make_scores(rng, 200)
    # put samples exactly on thresholds to exercise the strict comparison
    scores[:10] = make_grid(100).thresholds[::10]
    grid = make_grid(100)
    c = local_counts(LocalDataset(scores, labels), grid)
    tp, fp = linear_scan_counts(scores.tolist(), labels.tolist(), grid.thresholds.tolist())
    assert c.tp.tolist() == tp
    assert c.fp.tolist() == fp


def test_counts_monotone_and_totals(rng):
    scores, labels = make_scores(rng, 500)
    c = local_counts(LocalDataset(scores, labels), make_grid(25))
    assert c.is_monotone
    assert c.tp[0] == 0 and c.fp[0] == 0
    assert c.total_positive == labels.sum()
    assert c.total_negative == labels.size - labels.sum()


def test_scores_are_clamped(caplog):
    ds = LocalDataset(np.array([-0.5, 1.7, 0.5]), np.array([0, 1, 1]))
    assert ds.scores.tolist() == [0.0, 1.0, 0.5]
    assert "clamped 2" in caplog.text


def test_bad_labels_rejected():
    with pytest.raises(ValueError):
        LocalDataset(np.array([0.1]), np.array([2]))
    with pytest.raises(ValueError):
        Sample(float("nan"), 1)


# -- pair_transform / trapezoid ---------------------------------------------

def test_pair_transform_hand_example():
    pv = pair_transform(CountVector([0, 10, 10], [0, 0, 10]))
    assert pv.t.tolist() == [10, 20]
    assert pv.f.tolist() == [0, 10]


def test_pair_transform_zero():
    pv = pair_transform(CountVector.zeros(6))
    assert not pv.t.any() and not pv.f.any()


def test_pair_transform_rejects_decreasing_fp():
    with pytest.raises(NonMonotone):
        pair_transform(CountVector([0, 1, 2], [0, 3, 2]))


def test_pair_products_equal_direct_numerator(rng):
    for _ in range(10):
        tp = np.cumsum(rng.integers(0, 20, 30))
        fp = np.cumsum(rng.integers(0, 20, 30))
        pv = pair_transform(CountVector(tp, fp))
        direct = sum((tp[k] + tp[k - 1]) * (fp[k] - fp[k - 1]) for k in range(1, 30))
        assert int(np.dot(pv.t, pv.f)) == direct


def test_trapezoid_perfect_classifier():
    assert trapezoid_auc(CountVector([0, 10, 10], [0, 0, 10])) == 1.0


def test_trapezoid_diagonal():
    tp = np.array([0, 3, 7, 12, 20])
    assert trapezoid_auc(CountVector(tp, tp)) == 0.5


def test_trapezoid_matches_direct_formula(rng):
    scores, labels = make_scores(rng, 2000)
    c = local_counts(LocalDataset(scores, labels), make_grid(50))
    assert trapezoid_auc(c) == pytest.approx(direct_trapezoid(c.tp.tolist(), c.fp.tolist()), rel=1e-13)


def test_trapezoid_degenerate():
    with pytest.raises(DegenerateLabels):
        trapezoid_auc(CountVector([0, 0, 0], [0, 1, 4]))


def test_trapezoid_close_to_exact_on_large_sample():
    for seed in range(5):
        r = np.random.default_rng(seed)
        scores, labels = make_scores(r, 10_000, separation=0.4)
        approx = trapezoid_auc(local_counts(LocalDataset(scores, labels), make_grid(100)))
        exact = exact_auc(scores, labels)
        assert abs(approx - exact) / exact <= 0.005


def test_error_shrinks_with_grid_size():
    errs = {25: [], 50: [], 100: []}
    for seed in range(20):
        r = np.random.default_rng(1000 + seed)
        scores, labels = make_scores(r, 3000, separation=0.3)
        ds = LocalDataset(scores, labels)
        exact = exact_auc(scores, labels)
        for n in errs:
            errs[n].append(abs(trapezoid_auc(local_counts(ds, make_grid(n))) - exact))
    means = [np.mean(errs[n]) for n in (25, 50, 100)]
    assert means[0] >= means[1] >= means[2]


def test_roc_points_endpoints():
    pts = roc_points(CountVector([0, 4, 10], [0, 1, 5]))
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)


# -- properties -------------------------------------------------------------

datasets = st.lists(
    st.tuples(st.floats(0, 1, allow_nan=False), st.integers(0, 1)), min_size=0, max_size=60
)


@settings(max_examples=60, deadline=None)
@given(a=datasets, b=datasets, n=st.integers(2, 40))
def test_counts_are_additive(a, b, n):
    grid = make_grid(n)

    def ds(rows):
        return LocalDataset(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))

    union = local_counts(ds(a + b), grid)
    parts = sum_counts([local_counts(ds(a), grid), local_counts(ds(b), grid)])
    assert union.tp.tolist() == parts.tp.tolist()
    assert union.fp.tolist() == parts.fp.tolist()


@settings(max_examples=60, deadline=None)
@given(rows=datasets, n=st.integers(2, 40), seed=st.integers(0, 2**32 - 1))
def test_trapezoid_bounded_and_permutation_invariant(rows, n, seed):
    labels = [r[1] for r in rows]
    if 0 not in labels or 1 not in labels:
        return
    scores = np.array([r[0] for r in rows])
    labels = np.array(labels)
    grid = make_grid(n)
    auc = trapezoid_auc(local_counts(LocalDataset(scores, labels), grid))
    assert 0.0 <= auc <= 1.0
    perm = np.random.default_rng(seed).permutation(scores.size)
    assert trapezoid_auc(local_counts(LocalDataset(scores[perm], labels[perm]), grid)) == auc
