from __future__ import annotations

import numpy as np
import pytest

from streamov.oracle import (
    OracleConfig,
    fd_gradients,
    global_topk,
    naive_evidence,
    naive_forward,
    naive_fuse,
    naive_loss,
    naive_ranks,
    relative_error,
)
from streamov.trigger import TriggerParams


def test_global_topk_examples():
    assert global_topk([(0, 0.0, 0.3), (1, 1.0, 0.2)], 5) == {0, 1}
    assert global_topk([(0, 0.0, 0.9), (1, 1.0, 0.1), (2, 2.0, 0.5)], 2) == {0, 2}
    assert global_topk([(7, 1.0, 0.5), (3, 2.0, 0.5)], 1) == {7}
    with pytest.raises(ValueError):
        global_topk([], 0)


def test_naive_ranks():
    assert naive_ranks([0.3, 0.1, 0.5]) == [0.5, 0, 1]
    assert naive_ranks([0.2, 0.2]) == [0, 1]
    assert naive_ranks([4.0]) == [1]


def test_naive_evidence_examples():
    ones = naive_fuse(1, 1, 1, 1, 1)
    assert (ones.e_av, ones.e_v_hat, ones.e_a_hat, ones.route) == (1, 0, 0, "AV")
    window = [(0.1, 0.7, 0.1, 0.9, 0.3), (0.5, 0.2, 0.2, 0.4, 0.8), (0.9, 0.4, 0.4, 0.1, 0.5)]
    for ev in naive_evidence(window, query=False):
        assert ev.s_qv == 0 and ev.s_qa == 0
        assert ev.e_v == ev.s_v and ev.e_a == ev.s_a


def test_naive_fuse_gates_audio():
    ev = naive_fuse(0, 0, 0.5, 0.25, 0.75)
    assert ev.s_qa_gated == 0.375


def test_fd_zero_point():
    p = TriggerParams.zeros(4, 3)
    g = fd_gradients(p, np.ones((2, 4)), 0)
    np.testing.assert_allclose(g["b2"], [-0.5, 0.5], atol=1e-9)


def test_fd_singleton_query_gradient():
    rng = np.random.default_rng(0)
    p = TriggerParams.init(5, 4, 0)
    p.q_tr = rng.standard_normal(5)
    eps = 1e-5
    g = fd_gradients(p, rng.standard_normal((1, 5)), 1, eps)
    assert np.max(np.abs(g["q_tr"])) <= eps**2


def test_fd_restores_params_and_checks_eps():
    p = TriggerParams.init(3, 2, 1)
    before = {n: a.copy() for n, a in p.arrays().items()}
    fd_gradients(p, np.ones((2, 3)), 1)
    for n, a in p.arrays().items():
        np.testing.assert_array_equal(a, before[n])
    for eps in (1e-8, 1e-2):
        with pytest.raises(ValueError):
            fd_gradients(p, np.ones((1, 3)), 1, eps)


def test_naive_forward_zero_params():
    assert naive_forward(TriggerParams.zeros(3, 2), np.ones((2, 3))).tolist() == [0.0, 0.0]
    assert naive_loss(TriggerParams.zeros(3, 2), np.ones(3), 1) == pytest.approx(np.log(2))


def test_oracles_are_deterministic():
    p = TriggerParams.init(4, 3, 5)
    hs = np.random.default_rng(5).standard_normal((2, 4))
    a, b = fd_gradients(p, hs, 0), fd_gradients(p, hs, 0)
    for n in a:
        np.testing.assert_array_equal(a[n], b[n])
    np.testing.assert_array_equal(naive_forward(p, hs), naive_forward(p, hs))


def test_relative_error_and_config():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1.0, 0.0]), np.array([1.0, 1e-6])) == pytest.approx(1e-6)
    with pytest.raises(ValueError):
        OracleConfig(fd_eps=0.0)
