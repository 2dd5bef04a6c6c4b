import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superprune.dataset import (CSV_HEADER, N_FEATURES, FeatureMask, LabeledDataset, build_dataset,
                                cluster_centroids_balance, feature_scores, kmeans,
                                mutual_information, select_k_best, split, standardize_apply,
                                standardize_fit)
from superprune.features import FEATURE_NAMES
from superprune.semantics import check_equivalence
from superprune.synth import SynthConfig, enumerate_candidates

from conftest import P


def synthetic(n0, n1, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n0 + n1, N_FEATURES))
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    return LabeledDataset(X, y, np.zeros(n0 + n1, bool),
                          [f"l{i}" for i in range(n0 + n1)], [f"r{i}" for i in range(n0 + n1)])


def test_header():
    assert CSV_HEADER[:2] == ("lhs_id", "rhs_id")
    assert CSV_HEADER[2:-2] == FEATURE_NAMES
    assert CSV_HEADER[-2:] == ("label", "sampled")


def test_build_dataset_counts_and_labels(mul2):
    cfg = SynthConfig(candidate_cap=40)
    ds = build_dataset({"m": mul2}, cfg)
    assert len(ds) == 40
    cands = enumerate_candidates(mul2, cfg)
    want = [int(check_equivalence(mul2, c).equivalent) for c in cands]
    assert ds.y.tolist() == want
    assert ds.rhs_ids[0] == "m#0" and set(ds.lhs_ids) == {"m"}
    assert ds.provenance["dropped_unknown"] == 0


def test_build_dataset_parallel_matches_serial(mul2):
    corpus = {"a": mul2, "b": P("%0:i8 = var ; %1:i8 = sub %0, %0 ; infer %1")}
    cfg = SynthConfig(candidate_cap=30)
    assert build_dataset(corpus, cfg).to_csv() == build_dataset(corpus, cfg, jobs=2).to_csv()


def test_csv_round_trip(tmp_path):
    ds = synthetic(5, 3)
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    back = LabeledDataset.from_csv(path)
    assert np.array_equal(back.X, ds.X)
    assert back.y.tolist() == ds.y.tolist()
    assert back.to_csv() == ds.to_csv()


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        LabeledDataset.from_csv(p)


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, N_FEATURES)), [0, 2], [0, 0], ["a", "b"], ["c", "d"])
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, N_FEATURES)), [0], [0, 0], ["a", "b"], ["c", "d"])


def test_balance_exact_counts():
    out = cluster_centroids_balance(synthetic(100, 10), seed=0)
    assert out.class_counts() == (10, 10)
    assert len(out) == 20
    assert out.lhs_ids[:10] == ["centroid"] * 10


def test_balance_keeps_minority_rows_verbatim():
    ds = synthetic(50, 7)
    out = cluster_centroids_balance(ds, 0)
    assert np.array_equal(out.X[out.y == 1], ds.X[ds.y == 1])


def test_balance_degenerate_cases():
    ds = synthetic(10, 10)
    assert cluster_centroids_balance(ds, 0) is ds
    with pytest.raises(ValueError):
        cluster_centroids_balance(synthetic(10, 0), 0)


def test_balance_minority_zero_label():
    out = cluster_centroids_balance(synthetic(4, 30), 0)
    assert out.class_counts() == (4, 4)


def test_centroids_find_separated_blobs():
    rng = np.random.default_rng(1)
    a = rng.normal(0.0, 0.1, size=(60, N_FEATURES))
    b = rng.normal(10.0, 0.1, size=(40, N_FEATURES))
    X = np.vstack([a, b, rng.normal(size=(2, N_FEATURES))])
    y = np.r_[np.zeros(100, int), np.ones(2, int)]
    ds = LabeledDataset(X, y, np.zeros(102, bool), ["x"] * 102, ["y"] * 102)
    cents = cluster_centroids_balance(ds, 0).X[:2]
    cents = cents[np.argsort(cents[:, 0])]
    assert np.allclose(cents[0], a.mean(axis=0), atol=1e-9)
    assert np.allclose(cents[1], b.mean(axis=0), atol=1e-9)


def test_weighted_kmeans():
    rows = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 10.0], [11.0, 10.0]])
    c = kmeans(rows, 2, 0, weights=np.array([3, 1, 1, 1]))
    c = c[np.argsort(c[:, 0])]
    assert np.allclose(c, [[0.25, 0.0], [10.5, 10.0]])
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(6, 3))
    c = kmeans(pts, 6, 0)
    assert np.array_equal(np.sort(c, axis=0), np.sort(pts, axis=0))


def test_split_stratified_and_deterministic():
    ds = synthetic(50, 50)
    tr, te = split(ds, 0.8, seed=3)
    assert tr.class_counts() == (40, 40) and te.class_counts() == (10, 10)
    tr2, _ = split(ds, 0.8, seed=3)
    assert tr.rhs_ids == tr2.rhs_ids
    tr3, _ = split(ds, 0.8, seed=4)
    assert tr3.rhs_ids != tr.rhs_ids and len(tr3) == len(tr)
    assert not set(tr.rhs_ids) & set(te.rhs_ids)
    with pytest.raises(ValueError):
        split(ds, 1.0)


def test_mutual_information_examples():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 2000)
    p = y.mean()
    h = -(p * np.log(p) + (1 - p) * np.log(1 - p))
    assert mutual_information(y.astype(float), y) == pytest.approx(h, abs=1e-12)
    assert mutual_information(np.ones(2000), y) == 0.0
    noisy = mutual_information(y + rng.normal(0, 0.4, 2000), y)
    assert 0 < noisy < h


def test_mutual_information_permutation_null():
    rng = np.random.default_rng(5)
    x = rng.normal(size=1000)
    y = (x + rng.normal(0, 1, 1000) > 0).astype(int)
    null = [mutual_information(x, rng.permutation(y)) for _ in range(30)]
    shuffled = mutual_information(x, rng.permutation(y))
    assert shuffled <= np.mean(null) + 3 * np.std(null)
    assert mutual_information(x, y) > np.mean(null) + 3 * np.std(null)


def test_select_k_best():
    ds = synthetic(60, 40)
    ds.X[:, 7] = ds.y
    ds.X[:, 3] = 1.0
    scores = feature_scores(ds)
    order = sorted(range(N_FEATURES), key=lambda j: (-scores[j], j))
    assert order[0] == 7
    assert order[-1] == 3
    assert select_k_best(ds, 1).indices == (7,)
    assert select_k_best(ds, 20).indices == tuple(range(20))
    with pytest.raises(ValueError):
        select_k_best(ds, 0)


def test_select_ties_go_to_earlier_feature():
    ds = synthetic(10, 10)
    mask = select_k_best(ds, 3, scores=np.zeros(N_FEATURES))
    assert mask.indices == (0, 1, 2)


def test_feature_mask():
    m = FeatureMask((2, 5))
    assert m.k == 2 and m.names == (FEATURE_NAMES[2], FEATURE_NAMES[5])
    assert m.apply(np.arange(20.0)[None, :]).tolist() == [[2.0, 5.0]]
    with pytest.raises(ValueError):
        FeatureMask((1, 1))
    with pytest.raises(ValueError):
        FeatureMask((20,))


def test_standardize():
    rng = np.random.default_rng(0)
    X = rng.normal(3, 2, size=(200, N_FEATURES))
    X[:, 4] = 7.0
    s = standardize_fit(X)
    Z = standardize_apply(s, X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    live = [j for j in range(N_FEATURES) if j != 4]
    assert np.allclose(Z[:, live].std(axis=0), 1.0)
    assert np.all(Z[:, 4] == 0.0) and s.std[4] == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_standardize_fit_row_order_independent(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(37, N_FEATURES)) * rng.uniform(0.1, 100)
    a, b = standardize_fit(X), standardize_fit(X[rng.permutation(37)])
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(1, 10), st.integers(0, 1000))
def test_balance_property(n_major, n_minor, seed):
    if n_major <= n_minor:
        return
    out = cluster_centroids_balance(synthetic(n_major, n_minor, seed), seed)
    assert out.class_counts() == (n_minor, n_minor)
