import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from affectpipe import (
    ClassifierSpec,
    CVStrategy,
    FeatureMatrix,
    FeatureRow,
    cross_validate,
    fit,
    make_folds,
    metrics,
    predict,
    roc_auc,
)
from affectpipe.errors import (
    AUCUndefined,
    LengthMismatch,
    SchemaMismatch,
    SingleClass,
    TooFewRows,
    TooFewSubjects,
)
from affectpipe.types import LabelVector

KNN = lambda k: ClassifierSpec(f"knn{k}", "KNN", {"k_neighbors": k})
TREE = ClassifierSpec("tree", "DecisionTree", {"criterion": "entropy"})
LDA = ClassifierSpec("lda", "LDA")
LOGIT = ClassifierSpec("logit", "LogisticRegression")


def fm(X, subjects=None, phases=None):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    subjects = subjects or [f"S{i}" for i in range(n)]
    phases = phases or ["a"] * n
    rows = [FeatureRow(subjects[i], phases[i], i, tuple(X[i])) for i in range(n)]
    return FeatureMatrix(tuple(f"f{j}" for j in range(X.shape[1])), tuple(rows))


def lv(y):
    y = [int(v) for v in y]
    return LabelVector(tuple(y), {c: str(c) for c in sorted(set(y))})


# --- fit / predict ---

def test_knn_stores_training_set_verbatim():
    X = np.random.default_rng(0).normal(0, 1, (12, 3))
    y = np.array([0, 1] * 6)
    model = fit(KNN(9), X, y)
    np.testing.assert_array_equal(model.state["X"], X)
    np.testing.assert_array_equal(model.state["y"], y)
    assert model.state["k"] == 9


def test_tree_separable_four_points_depth_1():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    y = np.array([0, 0, 1, 1])
    model = fit(TREE, X, y)
    tree = model.state["tree"]
    assert "feature" in tree
    assert "feature" not in tree["left"] and "feature" not in tree["right"]
    pred, _ = predict(model, X)
    assert np.mean(pred == y) == 1.0


def test_single_class_rejected():
    with pytest.raises(SingleClass):
        fit(KNN(1), np.zeros((4, 2)), np.zeros(4, dtype=int))


def test_knn_k1_identity():
    X = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]])
    y = np.array([0, 1, 2])
    model = fit(KNN(1), X, y)
    pred, _ = predict(model, X)
    np.testing.assert_array_equal(pred, y)


def test_knn_k3_majority_vote():
    X = np.array([[0.0], [0.2], [1.0]])
    y = np.array([0, 0, 1])
    model = fit(KNN(3), X, y)
    pred, scores = predict(model, np.array([[0.5]]))
    assert pred[0] == 0
    np.testing.assert_allclose(scores[0], [2 / 3, 1 / 3])


def test_knn_vote_tie_breaks_to_smallest_class():
    X = np.array([[0.0], [1.0]])
    y = np.array([1, 0])
    model = fit(KNN(2), X, y)
    pred, _ = predict(model, np.array([[0.5]]))
    assert pred[0] == 0


def test_knn_brute_force_oracle():
    rng = np.random.default_rng(42)
    X = rng.normal(0, 1, (150, 4))
    y = rng.integers(0, 3, 150)
    y[:3] = [0, 1, 2]  # guarantee all classes
    Q = rng.normal(0, 1, (50, 4))
    for k in (1, 3, 7):
        model = fit(KNN(k), X, y)
        pred, _ = predict(model, Q)
        classes = np.unique(y)
        for qi, q in enumerate(Q):
            dist = [(float(np.sqrt(np.sum((X[i] - q) ** 2))), i)
                    for i in range(X.shape[0])]
            neighbors = [i for _, i in sorted(dist)[:k]]
            votes = {c: sum(1 for i in neighbors if y[i] == c) for c in classes}
            best = max(votes.values())
            expected = min(c for c in classes if votes[c] == best)
            assert pred[qi] == expected


def test_lda_gaussian_clouds():
    rng = np.random.default_rng(5)
    a = rng.normal([0, 0], 0.5, (200, 2))
    b = rng.normal([4, 0], 0.5, (200, 2))
    X = np.vstack([a[:150], b[:150]])
    y = np.array([0] * 150 + [1] * 150)
    model = fit(LDA, X, y)
    holdout = np.vstack([a[150:], b[150:]])
    truth = np.array([0] * 50 + [1] * 50)
    pred, _ = predict(model, holdout)
    assert np.mean(pred == truth) >= 0.99


def test_logistic_separable():
    rng = np.random.default_rng(6)
    X = np.vstack([rng.normal(-2, 0.5, (50, 2)), rng.normal(2, 0.5, (50, 2))])
    y = np.array([0] * 50 + [1] * 50)
    model = fit(LOGIT, X, y)
    pred, scores = predict(model, X)
    assert np.mean(pred == y) >= 0.99
    np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)


def test_scores_are_probabilities():
    rng = np.random.default_rng(7)
    X = rng.normal(0, 1, (30, 3))
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    for spec in (KNN(5), TREE, LDA, LOGIT):
        _, scores = predict(fit(spec, X, y), X)
        assert np.all(scores >= 0) and np.all(scores <= 1)
        np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)


def test_schema_mismatch():
    model = fit(KNN(1), np.zeros((4, 3)) + np.arange(4)[:, None],
                np.array([0, 1, 0, 1]))
    with pytest.raises(SchemaMismatch):
        predict(model, np.zeros((2, 2)))


def test_custom_handle_contract():
    class Majority:
        def fit(self, X, y):
            vals, counts = np.unique(y, return_counts=True)
            self.label = int(vals[np.argmax(counts)])
        def predict(self, X):
            return np.full(X.shape[0], self.label)

    spec = ClassifierSpec("maj", "custom", {"handle": Majority()})
    model = fit(spec, np.zeros((5, 1)) + np.arange(5)[:, None],
                np.array([0, 1, 1, 1, 0]))
    pred, scores = predict(model, np.zeros((3, 1)))
    np.testing.assert_array_equal(pred, [1, 1, 1])
    assert scores is None


def test_ensemble_scores_are_member_mean():
    rng = np.random.default_rng(8)
    X = rng.normal(0, 1, (40, 3))
    y = rng.integers(0, 2, 40)
    y[:2] = [0, 1]
    members = [KNN(3), LDA]
    ens = ClassifierSpec("ens", "AveragingEnsemble", {"members": members})
    model = fit(ens, X, y)
    Q = rng.normal(0, 1, (10, 3))
    _, ens_scores = predict(model, Q)
    member_scores = [predict(fit(m, X, y), Q)[1] for m in members]
    np.testing.assert_allclose(ens_scores, np.mean(member_scores, axis=0))
    pred, _ = predict(model, Q)
    np.testing.assert_array_equal(pred, model.classes[np.argmax(ens_scores, axis=1)])


# --- folds ---

def test_loso_15_subjects():
    X = np.arange(30, dtype=float).reshape(30, 1)
    subjects = [f"P{i // 2}" for i in range(30)]  # 15 subjects, 2 rows each
    m = fm(X, subjects=subjects)
    folds = make_folds(CVStrategy("loso"), m)
    assert len(folds) == 15
    for train, test in folds:
        test_subjects = {subjects[i] for i in test}
        train_subjects = {subjects[i] for i in train}
        assert len(test_subjects) == 1
        assert not test_subjects & train_subjects
    all_test = sorted(i for _, test in folds for i in test)
    assert all_test == list(range(30))


def test_kfold_even_split():
    m = fm(np.arange(10, dtype=float).reshape(10, 1))
    folds = make_folds(CVStrategy("kfold", folds=5, shuffle_seed=1), m)
    assert len(folds) == 5
    assert all(len(test) == 2 for _, test in folds)


def test_loso_single_subject_rejected():
    m = fm(np.zeros((4, 1)), subjects=["S1"] * 4)
    with pytest.raises(TooFewSubjects):
        make_folds(CVStrategy("loso"), m)


def test_kfold_too_many_folds_rejected():
    m = fm(np.zeros((3, 1)))
    with pytest.raises(TooFewRows):
        make_folds(CVStrategy("kfold", folds=5), m)


@given(st.integers(4, 60), st.integers(2, 8), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_kfold_partition_laws(n, k, seed):
    if k > n:
        return
    m = fm(np.arange(n, dtype=float).reshape(n, 1))
    folds = make_folds(CVStrategy("kfold", folds=k, shuffle_seed=seed), m)
    sizes = [len(test) for _, test in folds]
    assert max(sizes) - min(sizes) <= 1
    all_test = sorted(i for _, test in folds for i in test)
    assert all_test == list(range(n))
    for train, test in folds:
        assert not set(train) & set(test)
        assert len(train) + len(test) == n


# --- metrics ---

def test_accuracy_hand_example():
    out = metrics([0, 1, 1, 0], [0, 1, 0, 0])
    assert out["accuracy"] == 0.75


def test_f1_micro_equals_accuracy_multiclass():
    rng = np.random.default_rng(9)
    for _ in range(20):
        y_true = rng.integers(0, 4, 50)
        y_pred = rng.integers(0, 4, 50)
        out = metrics(y_true, y_pred)
        assert out["f1_micro"] == pytest.approx(out["accuracy"], abs=1e-12)


def test_perfect_scores_auc_1():
    y = np.array([0, 0, 1, 1])
    scores = np.array([0.1, 0.2, 0.8, 0.9])
    assert roc_auc(y, scores) == 1.0


def test_random_scores_auc_half():
    rng = np.random.default_rng(10)
    y = rng.integers(0, 2, 2000)
    scores = rng.uniform(0, 1, 2000)
    assert roc_auc(y, scores) == pytest.approx(0.5, abs=0.05)


def test_auc_monotone_invariance():
    rng = np.random.default_rng(11)
    y = rng.integers(0, 2, 200)
    y[:2] = [0, 1]
    s = rng.uniform(0, 1, 200)
    base = roc_auc(y, s)
    for transform in (lambda v: 3 * v + 1, np.exp, lambda v: v ** 3):
        assert roc_auc(y, transform(s)) == pytest.approx(base, abs=1e-12)


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        metrics([0, 1], [0])


def test_auc_undefined_single_class():
    with pytest.raises(AUCUndefined):
        roc_auc([1, 1, 1], [0.1, 0.5, 0.9])


def test_f1_macro_hand_example():
    # class 0: tp=2 fp=1 fn=0 -> f1 = 4/5; class 1: tp=1 fp=0 fn=1 -> f1 = 2/3
    out = metrics([0, 0, 1, 1], [0, 0, 0, 1])
    assert out["f1_macro"] == pytest.approx((4 / 5 + 2 / 3) / 2, rel=1e-12)


# --- cross_validate ---

def _separable(n_per=20, seed=12):
    rng = np.random.default_rng(seed)
    a = rng.normal([0, 0], 0.3, (n_per, 2))
    b = rng.normal([8, 8], 0.3, (n_per, 2))
    X = np.vstack([a, b])
    y = [0] * n_per + [1] * n_per
    subjects = [f"S{i % 4}" for i in range(2 * n_per)]
    return fm(X, subjects=subjects), lv(y)


def test_cv_separable_all_models_perfect():
    m, labels = _separable()
    report, _ = cross_validate([KNN(3), TREE, LDA, LOGIT], m, labels,
                               CVStrategy("kfold", folds=5, shuffle_seed=0))
    for name, entry in report.per_model.items():
        for fold in entry["folds"]:
            assert fold["accuracy"] == 1.0, name


def test_cv_shuffled_labels_at_chance():
    rng = np.random.default_rng(13)
    X = rng.normal(0, 1, (200, 4))
    y = np.array([0, 1] * 100)
    rng.shuffle(y)
    report, _ = cross_validate([KNN(5)], fm(X), lv(y),
                               CVStrategy("kfold", folds=5, shuffle_seed=0))
    mean_acc = report.per_model["knn5"]["aggregate"]["accuracy"][0]
    assert mean_acc == pytest.approx(0.5, abs=0.1)


def test_cv_loso_no_subject_leakage():
    m, labels = _separable()
    report, artifacts = cross_validate([KNN(3)], m, labels, CVStrategy("loso"))
    assert len(report.per_model["knn3"]["folds"]) == 4
    assert artifacts["y_true"].size == len(m)


def test_cv_deterministic():
    m, labels = _separable(seed=14)
    strat = CVStrategy("kfold", folds=4, shuffle_seed=3)
    specs = [KNN(3), LOGIT]
    a, _ = cross_validate(specs, m, labels, strat)
    b, _ = cross_validate(specs, m, labels, strat)
    assert a.to_records() == b.to_records()


def test_cv_report_records_shape():
    m, labels = _separable()
    report, _ = cross_validate([KNN(3)], m, labels,
                               CVStrategy("kfold", folds=5, shuffle_seed=0))
    records = report.to_records()
    models = {r[0] for r in records}
    assert models == {"knn3"}
    folds = {r[1] for r in records}
    assert folds == {"0", "1", "2", "3", "4", "mean", "std"}
    # binary task with scores: AUC present
    assert any(r[2] == "auc" for r in records)
