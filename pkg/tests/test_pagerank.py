import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prnibble import pagerank as prk
from prnibble import sbm
from prnibble.errors import ValidationError

from conftest import dense_pagerank, random_digraph


def test_edgeless_graph_exact():
    g = sbm.from_edges(6, [], seeds=[0, 1])
    Q = np.array([1.0, 2.0, 0.0, 0.5, 0.0, 3.0])
    res = prk.personalized_pagerank(g, Q, 0.7)
    assert np.array_equal(res.R, (1 - 0.7) * Q)
    assert res.converged and res.iterations == 1 and res.residual == 0.0


def test_two_cycle_fixed_point():
    g = sbm.from_edges(2, [(0, 1), (1, 0)], seeds=[0])
    res = prk.personalized_pagerank(g, np.ones(2), 0.85)
    assert res.converged
    assert np.allclose(res.R, 1.0, atol=1e-10, rtol=0)
    # the start (1-c)Q is not the fixed point; the change decays by exactly c per sweep
    hist = prk.residual_history(g, np.ones(2), 0.85, 30)
    assert np.allclose(np.array(hist[1:]) / np.array(hist[:-1]), 0.85, rtol=1e-9)


@pytest.mark.parametrize("c", [0.1, 0.5, 0.85, 0.99])
def test_path_closed_form(c):
    g = sbm.from_edges(4, [(0, 1), (1, 2)], seeds=[0])
    # vertex 3 isolated, so the path is 1 -> 2 -> 3 in 1-based terms
    Q = np.array([1.0, 1.0, 1.0, 0.0])
    res = prk.personalized_pagerank(g, Q, c)
    want = np.array([1 - c, (1 - c) * (1 + c), (1 - c) * (1 + c + c * c), 0.0])
    assert np.allclose(res.R, want, atol=1e-12, rtol=0)
    assert res.iterations <= 4


def test_matches_dense_solve_on_small_random_graphs():
    rng = np.random.default_rng(20240)
    for _ in range(20):
        n = 2 * int(rng.integers(1, 51))
        g = random_digraph(rng, n, float(rng.uniform(0.01, 0.3)))
        c = float(rng.uniform(0.05, 0.95))
        Q = (rng.random(n) < 0.5).astype(float)
        Q[0] = 1.0
        res = prk.personalized_pagerank(g, Q, c)
        assert res.converged
        assert np.max(np.abs(res.R - dense_pagerank(g, Q, c))) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(
    half=st.integers(1, 30),
    p=st.floats(0.0, 0.5),
    c=st.floats(0.01, 0.97),
    seed=st.integers(0, 2**32 - 1),
)
def test_invariants_on_random_graphs(half, p, c, seed):
    rng = np.random.default_rng(seed)
    n = 2 * half
    g = random_digraph(rng, n, p)
    Q = rng.random(n) * (rng.random(n) < 0.6)
    Q[0] += 0.5
    res = prk.personalized_pagerank(g, Q, c)
    assert res.converged and res.residual <= 1e-10
    # R >= (1-c) Q and mass can only leak
    assert np.all(res.R >= (1 - c) * Q - 1e-15)
    assert res.R.sum() <= Q.sum() + 1e-12
    # fixed-point verification
    assert np.abs(prk.apply_map(g, res.R, Q, c) - res.R).sum() <= 1e-10
    # geometric decay of the step size, up to rounding in the L1 differences
    hist = np.array(res.residuals)
    slack = 4 * n * np.finfo(float).eps * Q.sum()
    assert np.all(hist[1:] <= c * hist[:-1] + slack)


@settings(max_examples=30, deadline=None)
@given(half=st.integers(1, 30), p=st.floats(0.05, 0.5), c=st.floats(0.01, 0.97), seed=st.integers(0, 2**32 - 1))
def test_mass_conserved_without_dangling(half, p, c, seed):
    rng = np.random.default_rng(seed)
    g = random_digraph(rng, 2 * half, p, dangling_free=True)
    assert np.all(g.out_degree > 0)
    Q = rng.random(g.n) + 0.01
    tol = 1e-10
    res = prk.personalized_pagerank(g, Q, c, tol=tol)
    assert abs(res.R.sum() - Q.sum()) <= tol


@settings(max_examples=30, deadline=None)
@given(half=st.integers(2, 25), p=st.floats(0.0, 0.5), seed=st.integers(0, 2**32 - 1), bump=st.floats(0.01, 5.0))
def test_monotone_in_personalization(half, p, seed, bump):
    rng = np.random.default_rng(seed)
    g = random_digraph(rng, 2 * half, p)
    Q = rng.random(g.n)
    v = int(rng.integers(g.n))
    Q2 = Q.copy()
    Q2[v] += bump
    r1 = prk.personalized_pagerank(g, Q, 0.8, tol=1e-13).R
    r2 = prk.personalized_pagerank(g, Q2, 0.8, tol=1e-13).R
    assert np.all(r2 >= r1 - 1e-12)


def test_dangling_personalization_mode_keeps_mass():
    rng = np.random.default_rng(1)
    g = random_digraph(rng, 40, 0.05)
    assert np.any(g.out_degree == 0)
    Q = rng.random(40)
    res = prk.personalized_pagerank(g, Q, 0.85, dangling="personalization")
    assert abs(res.R.sum() - Q.sum()) <= 1e-10
    leak = prk.personalized_pagerank(g, Q, 0.85)
    assert leak.R.sum() < Q.sum()


def test_nonconvergence_is_reported():
    g = sbm.generate(sbm.ModelParams(200, 10.0, 2.0, 0.2), 0)
    res = prk.personalized_pagerank(g, prk.seed_personalization(g), 0.85, max_iter=3)
    assert not res.converged
    assert res.iterations == 3 and res.residual > 1e-10
    assert len(res.residuals) == 3


def test_figure1_residual_contracts():
    g = sbm.generate(sbm.ModelParams(20000, 150.0, 10.0, 0.2, 0.85), 5)
    hist = prk.residual_history(g, prk.seed_personalization(g), 0.85, 100)
    assert hist[-1] <= 0.85**99 * hist[0]
    res = prk.personalized_pagerank(g, prk.seed_personalization(g), 0.85)
    assert res.converged and res.iterations <= 200


def test_seed_personalization_is_indicator():
    g = sbm.generate(sbm.ModelParams(20, 4.0, 1.0, 0.3), 0)
    Q = prk.seed_personalization(g)
    assert np.array_equal(np.flatnonzero(Q), g.seeds) and set(np.unique(Q)) == {0.0, 1.0}


def test_read_personalization(tmp_path):
    path = tmp_path / "q.txt"
    path.write_text("0.5\n0\n2\n1\n")
    assert np.array_equal(prk.read_personalization(path, 4), [0.5, 0, 2, 1])
    with pytest.raises(ValidationError):
        prk.read_personalization(path, 5)


@pytest.mark.parametrize("kwargs", [{"c": 1.0}, {"c": 0.0}, {"tol": 0.0}, {"dangling": "x"}])
def test_rejects_bad_arguments(kwargs):
    g = sbm.from_edges(2, [(0, 1)], seeds=[0])
    args = {"c": 0.5, "tol": 1e-10, "dangling": "leak"} | kwargs
    with pytest.raises(ValidationError):
        prk.personalized_pagerank(g, np.ones(2), **args)


def test_rejects_bad_personalization():
    g = sbm.from_edges(2, [(0, 1)], seeds=[0])
    with pytest.raises(ValidationError):
        prk.personalized_pagerank(g, np.zeros(2), 0.5)
    with pytest.raises(ValidationError):
        prk.personalized_pagerank(g, np.array([1.0, -1.0]), 0.5)
    with pytest.raises(ValidationError):
        prk.personalized_pagerank(g, np.ones(3), 0.5)
