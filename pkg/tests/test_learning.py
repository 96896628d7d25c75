import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorkit import (LSSTM, LSSVM, TEL, ArgumentError, DataError, DecompositionSpec,
                       DimensionError, FitOptions, Tensor, TensorDataset, lsstm_predict,
                       lsstm_train, majority_vote, tel_predict, tel_train)
from tensorkit.learning import LsstmModel, TelModel, lsstm_decision, lssvm_solve

from .families import class_direction_dataset, separable_dataset


def accuracy(predict, model, d):
    return np.mean([predict(model, x) == y for x, y in zip(d.samples, d.labels)])


def lssvm_oracle(x, y, c):
    # dense KKT of min 1/2 |w|^2 + c/2 sum e^2, y_i (w.x_i + b) = 1 - e_i (primal form)
    n, p = x.shape
    design = np.hstack([x, np.ones((n, 1))])
    reg = np.eye(p + 1) / c
    reg[-1, -1] = 0.0
    sol = np.linalg.solve(design.T @ design + reg, design.T @ y)
    return sol[:-1], sol[-1]


# -- data --------------------------------------------------------------


def test_dataset_single_class():
    with pytest.raises(DataError):
        TensorDataset((Tensor(np.ones(2)), Tensor(np.ones(2))), [1, 1])


def test_dataset_shape_mismatch():
    with pytest.raises(DimensionError):
        TensorDataset((Tensor(np.ones(2)), Tensor(np.ones(3))), [1, -1])


# -- LS-SVM ------------------------------------------------------------


def test_lssvm_matches_primal_oracle():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 4))
    y = np.where(x @ [1.0, -2.0, 0.5, 0.0] > 0, 1.0, -1.0)
    w, b = lssvm_solve(x, y, 2.0)
    w0, b0 = lssvm_oracle(x, y, 2.0)
    np.testing.assert_allclose(w, w0, atol=1e-10)
    assert b == pytest.approx(b0, abs=1e-10)


def test_lssvm_estimator():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 3))
    y = np.where(x[:, 0] > 0, 1, -1)
    est = LSSVM(C=10.0).fit(x, y)
    assert np.mean(est.predict(x) == y) >= 0.9
    assert set(est.classes_) == {-1, 1}


# -- LSSTM -------------------------------------------------------------


def test_lsstm_separable_accuracy():
    d = separable_dataset(0)
    m = lsstm_train(d, 1.0)
    assert accuracy(lsstm_predict, m, d) == 1.0


def test_lsstm_order1_equals_lssvm():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((25, 5))
    y = np.where(x @ rng.standard_normal(5) > 0, 1, -1)
    d = TensorDataset(tuple(Tensor(v) for v in x), y)
    m = lsstm_train(d, 0.7)
    w, b = lssvm_oracle(x, y.astype(float), 0.7)
    got = np.array([lsstm_decision(m, v) for v in x])
    np.testing.assert_allclose(got, x @ w + b, rtol=0, atol=1e-8)


def test_lsstm_single_class():
    with pytest.raises(DataError):
        TensorDataset(tuple(Tensor(np.ones((2, 2))) for _ in range(3)), [1, 1, 1])


def test_lsstm_bad_c():
    with pytest.raises(ArgumentError):
        lsstm_train(separable_dataset(0), 0.0)


def test_lsstm_aligned_and_zero_samples():
    m = LsstmModel((np.array([1.0, 0.0]), np.array([0.0, 2.0])), 0.0, 1.0)
    assert lsstm_predict(m, 100 * m.weight_tensor()) == 1
    m2 = LsstmModel(m.mode_vectors, -0.3, 1.0)
    assert lsstm_predict(m2, np.zeros((2, 2))) == -1
    m3 = LsstmModel(m.mode_vectors, 0.0, 1.0)
    assert lsstm_predict(m3, np.zeros((2, 2))) == 1


def test_lsstm_shape_mismatch():
    m = lsstm_train(separable_dataset(0), 1.0)
    with pytest.raises(DimensionError):
        lsstm_decision(m, np.zeros((2, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-5, 5, allow_nan=False))
def test_lsstm_decision_multilinear(seed, alpha):
    d = separable_dataset(seed % 50)
    m = lsstm_train(d, 1.0, FitOptions(max_iter=5))
    x = np.random.default_rng(seed).standard_normal(d.shape)
    lhs = lsstm_decision(m, alpha * x) - m.bias
    rhs = alpha * (lsstm_decision(m, x) - m.bias)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_lsstm_objective_non_increasing(seed):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((20, 3, 4))
    y = np.where(np.arange(20) % 2 == 0, 1, -1)
    m = lsstm_train(TensorDataset(tuple(Tensor(x) for x in xs), y), 1.0)
    tr = m.objective_trace
    assert all(b <= a + 1e-10 for a, b in zip(tr, tr[1:]))


def test_lsstm_estimator():
    d = separable_dataset(1)
    x = np.stack([s.data for s in d.samples])
    est = LSSTM(C=1.0).fit(x, d.labels)
    assert np.mean(est.predict(x) == d.labels) == 1.0
    assert est.get_params()["C"] == 1.0


# -- TEL ---------------------------------------------------------------


def test_majority_vote_rules():
    assert majority_vote([1, 1, 1]) == 1
    assert majority_vote([1, -1]) == 1
    assert majority_vote([-1, -1, 1]) == -1


def test_tel_class_direction_accuracy():
    d = class_direction_dataset(0)
    m = tel_train(d, DecompositionSpec("cpd", 1))
    assert len(m.learners) == 2
    assert accuracy(tel_predict, m, d) == 1.0


def test_tel_tkd_spec():
    d = class_direction_dataset(1)
    m = tel_train(d, DecompositionSpec("tkd", [1, 1]))
    assert len(m.learners) == 2
    assert accuracy(tel_predict, m, d) == 1.0


def test_tel_learner_count_n3_r2():
    rng = np.random.default_rng(3)
    xs = tuple(Tensor(rng.standard_normal((3, 3, 3))) for _ in range(6))
    m = tel_train(TensorDataset(xs, [1, -1] * 3), DecompositionSpec("cpd", 2))
    assert len(m.learners) == 6
    assert sorted((n, r) for n, r, _ in m.learners) == [(n, r) for n in range(3) for r in range(2)]


def test_tel_tkd_count_and_rank_error():
    rng = np.random.default_rng(4)
    xs = tuple(Tensor(rng.standard_normal((3, 4))) for _ in range(6))
    d = TensorDataset(xs, [1, -1] * 3)
    assert len(tel_train(d, DecompositionSpec("tkd", [2, 3])).learners) == 5
    with pytest.raises(ArgumentError):
        tel_train(d, DecompositionSpec("tkd", 5))


def test_tel_permutation_invariance():
    d = class_direction_dataset(2, shape=(4, 3, 3))
    m = tel_train(d, DecompositionSpec("cpd", 2))
    base = [tel_predict(m, x) for x in d.samples]
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = [m.learners[i] for i in rng.permutation(len(m.learners))]
        shuffled = TelModel(perm, m.decomposition_spec, m.shape, m.options)
        assert [tel_predict(shuffled, x) for x in d.samples] == base


class TrainPredictLearner:
    """Learner following the train/predict protocol, nearest class mean."""

    def train(self, vectors, labels):
        vectors, labels = np.asarray(vectors), np.asarray(labels)
        self.pos = vectors[labels > 0].mean(axis=0)
        self.neg = vectors[labels < 0].mean(axis=0)

    def predict(self, vector):
        return 1 if np.linalg.norm(vector - self.pos) <= np.linalg.norm(vector - self.neg) else -1


def test_tel_train_predict_protocol():
    d = class_direction_dataset(3)
    m = tel_train(d, DecompositionSpec("cpd", 1), TrainPredictLearner)
    assert accuracy(tel_predict, m, d) == 1.0


def test_tel_sklearn_base_estimator():
    from sklearn.linear_model import LogisticRegression

    d = class_direction_dataset(4)
    x = np.stack([s.data for s in d.samples])
    est = TEL(rank=1, base_estimator=LogisticRegression()).fit(x, d.labels)
    assert est.n_learners_ == 2
    assert np.mean(est.predict(x) == d.labels) == 1.0


def test_tel_shape_mismatch():
    m = tel_train(class_direction_dataset(0), DecompositionSpec("cpd", 1))
    with pytest.raises(DimensionError):
        tel_predict(m, np.zeros((2, 2)))


def test_tel_invalid_rank():
    xs = (Tensor(np.ones((2, 2))), Tensor(np.ones((2, 2))))
    with pytest.raises(ArgumentError):
        tel_train(TensorDataset(xs, [1, -1]), DecompositionSpec("cpd", 0))


def test_decomposition_spec_form():
    with pytest.raises(ArgumentError):
        DecompositionSpec("tt", 1)


def test_tel_sign_dataset_slot_information():
    # X = s u o v: the sign convention puts sign(s) entirely into the mode-0
    # (weighted) slot, while the mode-1 slot is the same unit vector for both
    # classes up to noise
    from tensorkit.learning import _slot_vectors

    d = separable_dataset(0)
    feats = [_slot_vectors(x, DecompositionSpec("cpd", 1), FitOptions()) for x in d.samples]
    mode0 = np.array([f[(0, 0)] for f in feats])
    mode1 = np.array([f[(1, 0)] for f in feats])
    w = LSSVM().fit(mode0, d.labels)
    assert np.mean(w.predict(mode0) == d.labels) == 1.0
    pos, neg = mode1[d.labels > 0].mean(axis=0), mode1[d.labels < 0].mean(axis=0)
    assert np.linalg.norm(pos - neg) <= 0.05
