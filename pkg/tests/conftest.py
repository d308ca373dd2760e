import numpy as np
import pytest

from prnibble import sbm

# (criterion, verdict, detail) lines collected by the acceptance module
_CRITERIA = []


@pytest.fixture
def criterion():
    def record(num, title, ok, detail=""):
        _CRITERIA.append((num, title, "PASS" if ok else "FAIL", detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, verdict, detail in sorted(_CRITERIA, key=lambda t: t[0]):
        terminalreporter.write_line(f"{verdict} criterion {num}: {title}  [{detail}]")


def dense_pagerank(g, Q, c):
    """Oracle: solve (I - c P^T) R = (1-c) Q with a dense LU factorisation."""
    n = g.n
    P = np.zeros((n, n))
    for v, w in g.edges():
        P[v, w] = 1.0 / g.out_degree[v]
    return np.linalg.solve(np.eye(n) - c * P.T, (1.0 - c) * np.asarray(Q, float))


def random_digraph(rng, n, p, dangling_free=False, n_seeds=None):
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    if dangling_free:
        for v in np.flatnonzero(~adj.any(axis=1)):
            w = (v + 1 + rng.integers(n - 1)) % n
            adj[v, w] = True
    edges = np.argwhere(adj)
    half = n // 2
    seeds = range(n_seeds if n_seeds is not None else max(1, half // 4))
    return sbm.from_edges(n, edges, seeds=seeds)


@pytest.fixture
def tiny_params():
    return sbm.ModelParams(4, 4.0, 0.0, 0.5, 0.85)
