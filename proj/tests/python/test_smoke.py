"""End-to-end checks of the python bindings against numpy oracles."""

import numpy as np
import pytest

import odsd


def rng(seed=0):
    return np.random.default_rng(seed)


def test_softmax_matches_numpy():
    v = [1.5, -0.25, 3.0, 0.0]
    got = np.asarray(odsd.softmax(v))
    e = np.exp(np.asarray(v) - max(v))
    np.testing.assert_allclose(got, e / e.sum(), rtol=0, atol=1e-14)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)


def test_cosine_and_huber():
    assert odsd.cosine([3.0, 4.0], [3.0, 4.0]) == pytest.approx(1.0, abs=1e-12)
    assert odsd.cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        odsd.cosine([0.0, 0.0], [1.0, 0.0])

    a = rng(1).normal(size=(4, 3))
    b = a + rng(2).normal(scale=0.4, size=(4, 3))
    value, grad = odsd.huber(a, b, 1.0)
    r = b - a
    quad = np.abs(r) <= 1.0
    want = np.where(quad, 0.5 * r * r, np.abs(r) - 0.5).mean()
    assert value == pytest.approx(want, rel=1e-12)
    want_grad = np.where(quad, r, np.sign(r)) / r.size
    np.testing.assert_allclose(np.asarray(grad), want_grad, atol=1e-12)


def test_sym_eig_against_numpy():
    for seed in range(5):
        a = rng(seed).normal(size=(6, 6))
        m = (a + a.T) / 2
        values, vectors = odsd.sym_eig(m)
        values = np.asarray(values)
        vectors = np.asarray(vectors)
        np.testing.assert_allclose(values, np.linalg.eigvalsh(m)[::-1], atol=1e-10)
        # columns are orthonormal eigenvectors
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(6), atol=1e-10)
        np.testing.assert_allclose(m @ vectors, vectors @ np.diag(values), atol=1e-9)


def test_sym_eig_backward_fd():
    a = rng(7).normal(size=(4, 4))
    m = (a + a.T) / 2
    gv = rng(8).normal(size=4)

    def phi(mat):
        return float(np.dot(gv, np.asarray(odsd.sym_eig(mat)[0])))

    values, vectors = odsd.sym_eig(m)
    grad = np.asarray(odsd.sym_eig_backward(values, vectors, list(gv), np.zeros((4, 4)), 1e-8))

    # directional derivatives along symmetric perturbations
    h = 1e-6
    for i in range(4):
        for j in range(i, 4):
            step = np.zeros_like(m)
            step[i, j] += h
            step[j, i] += h if i != j else 0.0
            fd = (phi(m + step) - phi(m - step)) / (2 * h)
            want = grad[i, j] + grad[j, i] if i != j else grad[i, i]
            assert fd == pytest.approx(want, abs=1e-5)


def test_kmeans_recovers_two_blobs():
    pts = np.vstack(
        [rng(3).normal(loc=0.0, scale=0.05, size=(20, 2)),
         rng(4).normal(loc=5.0, scale=0.05, size=(20, 2))]
    )
    centers, assignment, objective = odsd.kmeans(pts, 2, seed=11)
    centers = np.asarray(centers)
    assignment = np.asarray(assignment)
    lo = centers[:, 0].argmin()
    assert centers[lo, 0] == pytest.approx(0.0, abs=0.1)
    assert centers[1 - lo, 0] == pytest.approx(5.0, abs=0.1)
    assert len(set(assignment[:20])) == 1
    assert len(set(assignment[20:])) == 1
    again = odsd.kmeans(pts, 2, seed=11)
    np.testing.assert_array_equal(np.asarray(again[0]), centers)


def test_score_pool_contracts():
    logits = rng(5).normal(scale=3.0, size=(40, 4))
    table = odsd.score_pool(logits, k=3, seed=2)
    sc = np.asarray(table["sc"])
    so = np.asarray(table["so"])
    sd = np.asarray(table["sd"])
    total = np.asarray(table["s_total"])
    assert ((sc >= 0) & (sc <= 1)).all()
    assert (np.abs(so) <= 1).all()
    assert ((sd >= 0) & (sd <= 1)).all()
    np.testing.assert_array_equal(total, sc - so + sd)

    picked = odsd.select_top(list(total), 10)
    order = sorted(range(len(total)), key=lambda i: (-total[i], i))
    assert list(picked) == order[:10]


def test_total_loss_composition_and_fd():
    n = 3
    t = rng(9).normal(size=(2 * n, 4))
    s = rng(10).normal(size=(2 * n, 4))
    out = odsd.total_loss(t, s, lambda1=2.0, lambda2=0.7)
    assert out["total"] == out["kd"] + 2.0 * out["denoise"] + 0.7 * (
        out["contrast_inst"] + out["contrast_ts"]
    )

    # spectral gap guard for the finite-difference probe
    z = odsd.gram_embed(s, 2 * n)
    values = np.asarray(z["values"])
    d = min(2 * n - 1, 4)
    assert min(values[:d] - values[1 : d + 1]) > 1e-3

    grad = np.asarray(out["grad_student"])
    h = 1e-5
    fd = np.zeros_like(grad)
    for i in range(s.shape[0]):
        for j in range(s.shape[1]):
            sp = s.copy()
            sp[i, j] += h
            sm = s.copy()
            sm[i, j] -= h
            hi = odsd.total_loss(t, sp, lambda1=2.0, lambda2=0.7)["total"]
            lo = odsd.total_loss(t, sm, lambda1=2.0, lambda2=0.7)["total"]
            fd[i, j] = (hi - lo) / (2 * h)
    scale = max(np.abs(grad).max(), np.abs(fd).max(), 1e-10)
    assert np.abs(grad - fd).max() / scale < 1e-4


def test_gram_embed_trace_identity():
    f = rng(11).normal(size=(7, 3))
    z = np.asarray(odsd.gram_embed(f, 7)["z"])
    diffs = f[:, None, :] - f[None, :, :]
    sum_d2 = (diffs**2).sum()
    assert abs(sum_d2 - 2 * 7 * (z**2).sum()) <= 1e-8 * (1 + sum_d2)


def test_mlp_forward_runs():
    net = odsd.Mlp([3, 8, 2], seed=4)
    assert list(net.sizes) == [3, 8, 2]
    x = rng(12).normal(size=(5, 3))
    out = np.asarray(net.forward(x))
    assert out.shape == (5, 2)
    np.testing.assert_array_equal(out, np.asarray(odsd.Mlp([3, 8, 2], seed=4).forward(x)))
    with pytest.raises(ValueError):
        net.forward(rng(13).normal(size=(5, 4)))


def test_synth_benchmark_layout():
    data = odsd.synth_benchmark(seed=3)
    assert np.asarray(data["train_x"]).shape == (1000, 8)
    assert np.asarray(data["test_x"]).shape == (1000, 8)
    pool = np.asarray(data["pool_x"])
    assert pool.shape == (4000, 8)
    assert len(data["pool_ids"]) == 4000
    tags = data["pool_tags"]
    assert tags.count("ood") == 1320
    again = odsd.synth_benchmark(seed=3)
    np.testing.assert_array_equal(pool, np.asarray(again["pool_x"]))
