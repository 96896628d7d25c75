import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorkit import (CPD, HOOI, HOSVD, TTSVD, ArgumentError, DimensionError, FitOptions,
                       RandomizedCPD, Tensor, TensorCPD, TensorTKD, TensorTT, cpd_als,
                       cpd_randomized, hooi, hosvd, tt_svd)
from tensorkit.decompositions import cpd_init

from .families import cp_instance, tt_instance, tucker_instance

seeds = st.integers(0, 2**31 - 1)


def rank1():
    return np.einsum("i,j,k->ijk", [1.0, 2.0], [1.0, 1.0], [1.0, -1.0])


def non_increasing(trace, slack):
    return all(b <= a + slack for a, b in zip(trace, trace[1:]))


# -- cpd_als -----------------------------------------------------------


def test_cpd_rank1_exact():
    res = cpd_als(rank1(), 1)
    assert res.rel_error <= 1e-10
    assert res.converged
    assert isinstance(res.form, TensorCPD)
    assert res.form.is_normalised()


def test_cpd_zero_tensor():
    res = cpd_als(np.zeros((2, 3, 2)), 1)
    np.testing.assert_array_equal(res.form.weights, [0.0])
    assert res.rel_error == 0.0


def test_cpd_444_rank2_seed0():
    x, _ = cp_instance(0, shape=(4, 4, 4))
    res = cpd_als(x, 2)
    assert res.rel_error <= 1e-6
    assert res.iterations <= 50


def test_cpd_errors():
    with pytest.raises(ArgumentError):
        cpd_als(rank1(), 0)
    with pytest.raises(DimensionError):
        cpd_als(np.ones(3), 1)


def test_cpd_sign_convention():
    x, _ = cp_instance(3)
    form = cpd_als(x, 2).form
    for f in form.factors:
        idx = np.argmax(np.abs(f), axis=0)
        assert np.all(f[idx, np.arange(2)] >= 0)


def test_cpd_recovers_factors_up_to_permutation():
    x, factors = cp_instance(1)
    form = cpd_als(x, 2).form
    for f_true, f_fit in zip(factors, form.factors):
        unit = f_true / np.linalg.norm(f_true, axis=0)
        corr = np.abs(unit.T @ f_fit)
        assert np.allclose(np.sort(corr.max(axis=0)), 1.0, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_cpd_als_monotone(seed):
    x = np.random.default_rng(seed).standard_normal((5, 4, 3))
    res = cpd_als(x, 3)
    assert non_increasing(res.error_trace, 1e-12)


def test_cpd_deterministic():
    x = np.random.default_rng(9).standard_normal((5, 4, 3))
    a, b = cpd_als(x, 2, FitOptions(seed=4)), cpd_als(x, 2, FitOptions(seed=4))
    assert a.error_trace == b.error_trace
    for fa, fb in zip(a.form.factors, b.form.factors):
        np.testing.assert_array_equal(fa, fb)


def test_cpd_init_pads_with_gaussian():
    init = cpd_init(np.ones((2, 3, 4)), 3, np.random.default_rng(0))
    assert [f.shape for f in init] == [(2, 3), (3, 3), (4, 3)]


def test_cpd_keeps_modes():
    t = Tensor(rank1(), ["a", "b", "c"])
    assert cpd_als(t, 1).form.modes == t.modes


# -- cpd_randomized ----------------------------------------------------


def test_randomized_rank1_333():
    x = np.einsum("i,j,k->ijk", [1.0, 2.0, 3.0], [1.0, -1.0, 0.5], [2.0, 1.0, 1.0])
    assert cpd_randomized(x, 1, 9).rel_error <= 1e-6


def test_randomized_full_sampling_matches_als():
    x = np.random.default_rng(5).standard_normal((4, 5, 3))
    opts = FitOptions(max_iter=30, seed=2)
    full = max(5 * 3, 4 * 3, 4 * 5)
    a, b = cpd_als(x, 2, opts), cpd_randomized(x, 2, full, opts)
    np.testing.assert_allclose(a.error_trace, b.error_trace, rtol=0, atol=1e-10)
    for fa, fb in zip(a.form.factors, b.form.factors):
        np.testing.assert_allclose(fa, fb, rtol=0, atol=1e-10)


def test_randomized_sample_below_rank():
    with pytest.raises(ArgumentError):
        cpd_randomized(rank1(), 3, 2)


def test_randomized_trace_on_full_tensor():
    x, _ = cp_instance(2)
    res = cpd_randomized(x, 2, 20)
    assert res.error_trace[-1] == pytest.approx(res.rel_error, abs=1e-12)


# -- hosvd / hooi ------------------------------------------------------


def test_hosvd_full_rank_exact():
    x = np.random.default_rng(0).standard_normal((3, 4, 2))
    assert hosvd(x, [3, 4, 2]).rel_error <= 1e-10


def test_hosvd_rank111():
    res = hosvd(rank1(), [1, 1, 1])
    assert res.rel_error <= 1e-10
    assert isinstance(res.form, TensorTKD)


@pytest.mark.parametrize("seed", range(5))
def test_hosvd_core_all_orthogonality(seed):
    # exact for untruncated HOSVD; truncating other modes breaks it
    x = np.random.default_rng(seed).standard_normal((4, 5, 3))
    core = hosvd(x, [4, 5, 3]).form.core
    for n in range(3):
        slices = np.moveaxis(core, n, 0).reshape(core.shape[n], -1)
        gram = slices @ slices.T
        assert np.abs(gram - np.diag(np.diag(gram))).max() <= 1e-10
        assert np.all(np.diff(np.diag(gram)) <= 1e-10)


def test_hosvd_factors_orthonormal():
    form = hosvd(np.random.default_rng(1).standard_normal((4, 5, 3)), [3, 4, 2]).form
    for f in form.factors:
        assert np.abs(f.T @ f - np.eye(f.shape[1])).max() <= 1e-10


def test_hosvd_rank_too_large():
    with pytest.raises(ArgumentError):
        hosvd(np.ones((2, 3)), [3, 1])


def test_hooi_full_rank_one_sweep():
    x = np.random.default_rng(2).standard_normal((3, 3, 2))
    res = hooi(x, [3, 3, 2])
    assert res.rel_error <= 1e-10
    assert res.iterations <= 2


def test_hooi_not_worse_than_hosvd():
    x = np.random.default_rng(0).standard_normal((5, 5, 5))
    assert hooi(x, [2, 2, 2]).rel_error <= hosvd(x, [2, 2, 2]).rel_error + 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_hooi_monotone_and_bounded(seed):
    x = np.random.default_rng(seed).standard_normal((5, 4, 6))
    a, b = hosvd(x, [2, 3, 2]), hooi(x, [2, 3, 2])
    assert non_increasing(b.error_trace, 1e-12)
    assert b.rel_error <= a.rel_error + 1e-12


def test_tucker_family_recovery():
    x, _, _ = tucker_instance(0)
    assert hooi(x, (3, 2, 4)).rel_error <= 1e-6


# -- tt_svd ------------------------------------------------------------


def test_tt_rank1():
    res = tt_svd(rank1(), eps=1e-10)
    assert res.form.ranks == (1, 1)
    assert res.rel_error <= 1e-10


def test_tt_order2_matches_svd():
    m = np.random.default_rng(3).standard_normal((4, 6))
    form = tt_svd(m, eps=1e-12).form
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    c0 = form.cores[0][0]
    np.testing.assert_allclose(np.abs(c0), np.abs(u), atol=1e-10)
    np.testing.assert_allclose(form.full(), m, atol=1e-10)


def test_tt_random_eps_half():
    x = np.random.default_rng(0).standard_normal((3, 4, 5))
    assert tt_svd(x, eps=0.5).rel_error <= 0.5


def test_tt_ranks_mode_and_clipping():
    x, _ = tt_instance(0)
    res = tt_svd(x, ranks=[2, 3, 2])
    assert isinstance(res.form, TensorTT)
    assert res.rel_error <= 1e-10
    assert tt_svd(x, ranks=[50, 50, 50]).form.ranks == (5, 12, 3)


@pytest.mark.parametrize("kw", [{}, {"eps": 0.1, "ranks": [1, 1]}, {"eps": 0.0},
                                {"ranks": [1]}, {"ranks": [1, 0]}])
def test_tt_invalid(kw):
    with pytest.raises(ArgumentError):
        tt_svd(rank1(), **kw)


@settings(max_examples=40, deadline=None)
@given(seeds, st.lists(st.integers(1, 5), min_size=2, max_size=4),
       st.sampled_from([0.5, 0.1, 0.01]))
def test_tt_error_bound_property(seed, shape, eps):
    x = np.random.default_rng(seed).standard_normal(shape)
    assert tt_svd(x, eps=eps).rel_error <= eps


# -- estimators --------------------------------------------------------


def test_cpd_estimator_api():
    est = CPD(rank=1)
    assert est.get_params() == {"rank": 1, "max_iter": 50, "tol": 1e-8, "random_state": 0,
                                "verbose": False}
    form = est.fit_transform(rank1())
    assert est.rel_error_ <= 1e-10
    np.testing.assert_allclose(est.inverse_transform().data, rank1(), atol=1e-10)
    assert est.transform(rank1()).rank == 1
    assert form is est.form_


def test_estimator_set_params_and_clone():
    from sklearn.base import clone

    est = HOOI(ranks=[1, 1, 1]).set_params(max_iter=5)
    copy = clone(est)
    assert copy.get_params()["max_iter"] == 5
    assert not hasattr(copy, "form_")


def test_other_estimators_fit():
    x, _, _ = tucker_instance(1)
    assert HOSVD(ranks=(3, 2, 4)).fit(x).rel_error_ <= 1e-10
    assert TTSVD(eps=1e-8).fit(x).rel_error_ <= 1e-8
    cx, _ = cp_instance(4)
    est = RandomizedCPD(rank=2).fit(cx)
    assert est.rel_error_ <= 1e-6
    assert len(est.error_trace_) == est.n_iter_


def test_transform_before_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CPD().transform(rank1())
