import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import brainkernels.learn as learn
from brainkernels.data_model import SeverityClass
from brainkernels.learn import (CLASSES, DegenerateKernelError, EvalReport, KernelMatrix,
                                dual_objective, fit_fold, linear_kernel, loo_evaluate,
                                multiclass_decisions, multiclass_predict, normalize_kernel, predict,
                                sum_kernel, train_multiclass, train_svm, vectorize_upper)
from oracles import qp_dual_oracle

M, MO, S = SeverityClass.MILD, SeverityClass.MODERATE, SeverityClass.SEVERE


def _psd(rng, n, rank=5):
    F = rng.standard_normal((n, rank))
    return F @ F.T


def _labels(rng, n):
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return y


def _check_feasible(model, tol=1e-8):
    a = model.alphas
    assert np.all(a >= 0) and np.all(a <= model.C)
    assert abs(a @ model.y) <= tol


def _block_kernel(labels):
    lab = np.asarray(labels)
    return (lab[:, None] == lab[None, :]).astype(float)


class TestFeatures:

    def test_vectorize_upper_order(self):
        m = np.arange(9.0).reshape(3, 3)
        assert vectorize_upper(m).tolist() == [1, 2, 5]

    def test_vectorize_upper_length(self):
        assert vectorize_upper(np.zeros((111, 111))).size == 6105

    @given(st.integers(2, 12), st.integers(0, 2**32 - 1))
    def test_vectorize_upper_bijection(self, K, seed):
        A = np.random.default_rng(seed).random((K, K))
        A = A + A.T
        v = vectorize_upper(A)
        B = np.zeros_like(A)
        B[np.triu_indices(K, 1)] = v
        B = B + B.T + np.diag(np.diag(A))
        assert np.array_equal(A, B)

    def test_linear_kernel_examples(self):
        k = linear_kernel([[1, 2], [3, 4], [-2, 1]])
        assert k.values[0, 1] == 11
        assert k.values[0, 2] == 0
        assert k.values[1, 1] == 25

    def test_linear_kernel_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            linear_kernel([[1, 2], [1, 2, 3]])


class TestNormalizeAndSum:

    def test_two_by_two(self):
        k = normalize_kernel(KernelMatrix(np.array([[4.0, 2], [2, 9]])))
        assert np.allclose(k.values, [[1, 1 / 3], [1 / 3, 1]], rtol=0, atol=1e-15)
        assert k.normalized

    def test_idempotent(self, rng):
        k = normalize_kernel(KernelMatrix(_psd(rng, 8)))
        assert np.all(np.diag(k.values) == 1)
        assert np.allclose(normalize_kernel(k).values, k.values, rtol=0, atol=1e-12)

    def test_zero_diagonal_names_subject(self):
        k = KernelMatrix(np.diag([1.0, 0.0, 2.0]))
        with pytest.raises(DegenerateKernelError, match="subj-b"):
            normalize_kernel(k, ids=["subj-a", "subj-b", "subj-c"])

    def test_weights_one_zero(self, rng):
        a, b = KernelMatrix(_psd(rng, 6)), KernelMatrix(_psd(rng, 6))
        assert np.array_equal(sum_kernel([a, b], [1.0, 0.0]).values, a.values)

    @pytest.mark.parametrize("weights", [[0.7, 0.7], [-0.5, 1.5], [1.0]])
    def test_bad_weights(self, rng, weights):
        a, b = KernelMatrix(_psd(rng, 4)), KernelMatrix(_psd(rng, 4))
        with pytest.raises(ValueError):
            sum_kernel([a, b], weights)

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError, match="sizes"):
            sum_kernel([KernelMatrix(_psd(rng, 4)), KernelMatrix(_psd(rng, 5))])

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1))
    def test_normalized_sum_psd(self, seed, w):
        rng = np.random.default_rng(seed)
        ks = [normalize_kernel(KernelMatrix(_psd(rng, 10, r) + 1e-6 * np.eye(10))) for r in (2, 6)]
        s = sum_kernel(ks, [w, 1 - w])
        assert s.is_psd(1e-8)
        assert s.normalized


class TestSVM:

    def test_identity_pair(self):
        model = train_svm(np.eye(2), [1, -1], C=10)
        assert model.support.tolist() == [0, 1]
        assert np.allclose(model.alphas, [1, 1], atol=1e-12)
        assert predict(model, [1, 0]) > 0 and predict(model, [0, 1]) < 0

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="single class"):
            train_svm(np.eye(3), [1, 1, 1])

    def test_iteration_cap(self, rng):
        K, y = _psd(rng, 20), _labels(rng, 20)
        with pytest.raises(learn.ConvergenceError) as ei:
            train_svm(K, y, C=10, max_iter=2)
        assert ei.value.residual > 1e-3

    def test_predict_length_mismatch(self):
        model = train_svm(np.eye(2), [1, -1])
        with pytest.raises(ValueError, match="length"):
            predict(model, [1, 0, 0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
    def test_feasibility_and_stationarity(self, seed, C):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 25))
        K, y = _psd(rng, n, int(rng.integers(1, 8))), _labels(rng, n)
        model = train_svm(K, y, C=C)
        _check_feasible(model)
        # independent KKT check from (alpha, b, K, y, C)
        margin = y * (K @ (model.alphas * y) + model.bias)
        scale = 2e-3 * max(1.0, np.abs(K).max())
        a = model.alphas
        assert np.all(margin[a == 0] >= 1 - scale)
        assert np.all(margin[a >= C] <= 1 + scale)
        free = (a > 0) & (a < C)
        assert np.all(np.abs(margin[free] - 1) <= scale)

    def test_matches_qp_oracle(self):
        rng = np.random.default_rng(7)
        Ks = np.array([_psd(rng, 10) for _ in range(8)])
        Ys = np.array([_labels(rng, 10) for _ in range(8)])
        A, obj = qp_dual_oracle(Ks, Ys, 1.0, steps=100_000)
        for K, y, a_or, o in zip(Ks, Ys, A, obj):
            model = train_svm(K, y, C=1.0)
            assert abs(model.objective - o) <= 1e-4 * abs(o)
            assert model.objective == pytest.approx(dual_objective(model.alphas, y, K), abs=1e-12)
            # decision values on fresh rows agree with the oracle's
            free = (a_or > 1e-6) & (a_or < 1 - 1e-6)
            if free.any():
                b_or = np.mean(y[free] - K[free] @ (a_or * y))
                rows = rng.standard_normal((5, 10)) @ K / 3
                for r in rows:
                    assert predict(model, r) == pytest.approx(r @ (a_or * y) + b_or, abs=1e-3 * max(1, np.abs(r).max()))

    def test_duplicate_training_point(self):
        K = np.array([[2.0, 0, 0], [0, 2, 0], [0, 0, 2]])
        model = train_svm(K, [1, -1, -1])
        assert predict(model, K[0]) > 0 and predict(model, K[2]) < 0


class TestMulticlass:

    def test_tie_goes_to_mild(self):
        models = [0.0, 0.0, 0.0]
        assert CLASSES[int(np.argmax(multiclass_decisions(models, []))) ] == M

    def test_identical_to_training_subject(self):
        labels = [M, M, MO, MO, S, S]
        K = _block_kernel(labels) + np.eye(6)
        assert multiclass_predict(K, labels, 1.0, K[0]) == [M]
        assert multiclass_predict(K, labels, 1.0, K[[2, 4]]) == [MO, S]

    def test_missing_class_warns(self, caplog):
        labels = [M, M, MO, MO]
        with caplog.at_level("WARNING"):
            models = train_multiclass(_block_kernel(labels), labels)
        assert models[2] == -np.inf
        assert "Severe" in caplog.text


class TestLOO:

    def test_identity_uninformative(self):
        labels = [M, MO, S] * 3
        rep = loo_evaluate(np.eye(9), labels)
        assert "uninformative kernel" in rep.flags

    def test_block_kernel_perfect(self):
        labels = [M, MO, S] * 4
        rep = loo_evaluate(_block_kernel(labels), labels)
        assert rep.accuracy == 100.0 and not rep.flags

    def test_accuracy_format(self):
        true = [M] * 58
        pred = [M] * 32 + [MO] * 26
        rep = EvalReport([str(i) for i in range(58)], true, pred, np.zeros((58, 3)))
        assert rep.to_dict()["accuracy"] == 55.17
        assert rep.n_correct == 32

    def test_too_few_subjects(self):
        with pytest.raises(ValueError, match="at least 3"):
            loo_evaluate(np.eye(2), [M, MO])

    def test_fold_isolation(self, monkeypatch):
        rng = np.random.default_rng(3)
        labels = [M, MO, S] * 4
        K = _block_kernel(labels) + 0.1 * _psd(rng, 12)
        seen = []
        real = learn.train_svm

        def guarded(k, y, *a, **kw):
            assert np.all(np.isfinite(k)), "test subject leaked into training"
            seen.append(np.asarray(k).shape)
            return real(k, y, *a, **kw)

        monkeypatch.setattr(learn, "train_svm", guarded)
        for t in range(12):
            P = K.copy()
            P[t, :] = np.nan
            P[:, t] = np.nan
            fit_fold(P, labels, t)
        assert set(seen) == {(11, 11)}

    def test_fold_error_tagged(self):
        labels = [M, MO, S] * 2
        K = _block_kernel(labels)
        with pytest.raises(ValueError, match=r"fold 0 \(subject a\)"):
            loo_evaluate(K, labels, C=-1, ids=list("abcdef"))

    def test_deterministic_and_consistent(self):
        rng = np.random.default_rng(9)
        labels = [CLASSES[i % 3] for i in range(15)]
        K = _psd(rng, 15, 6) + _block_kernel(labels)
        a = loo_evaluate(K, labels, ids=[f"s{i}" for i in range(15)])
        b = loo_evaluate(K, labels, ids=[f"s{i}" for i in range(15)])
        assert a.to_json() == b.to_json()
        assert a.accuracy == 100.0 * np.trace(a.confusion) / 15
        assert a.confusion.sum() == 15

    def test_inner_c_grid(self):
        labels = [M, MO, S] * 3
        rep = loo_evaluate(_block_kernel(labels), labels, c_grid=[0.1, 1, 10])
        assert len(rep.config["c_chosen"]) == 9
        assert set(rep.config["c_chosen"]) <= {0.1, 1, 10}
        assert rep.accuracy == 100.0

    def test_report_roundtrip(self):
        labels = [M, MO, S] * 3
        rep = loo_evaluate(np.eye(9) + _block_kernel(labels), labels, config={"method": "x"})
        d = json.loads(rep.to_json())
        back = EvalReport.from_dict(d)
        assert back.to_dict() == rep.to_dict()


def test_kernel_matrix_validation():
    with pytest.raises(ValueError, match="square"):
        KernelMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="symmetric"):
        KernelMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))
    assert not KernelMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])).is_psd()
