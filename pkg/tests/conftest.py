import numpy as np

from ratioscope.data import Dataset, pool
from ratioscope.graph import knn_graph

# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_dataset(features, prefix="s"):
    features = np.asarray(features, dtype=float)
    return Dataset(
        features=features,
        feature_names=tuple(f"f{k}" for k in range(features.shape[0])),
        sample_ids=tuple(f"{prefix}{i}" for i in range(features.shape[1])),
    )


def random_instance(rng, d=None, n_inlier=None, n_test=None, K=None, sigma2=None):
    """Random pooled dataset plus similarity graph for solver tests."""
    d = d or int(rng.integers(2, 8))
    n_inlier = n_inlier or int(rng.integers(5, 20))
    n_test = n_test or int(rng.integers(3, 12))
    inliers = make_dataset(rng.normal(size=(d, n_inlier)), "a")
    test = make_dataset(rng.normal(size=(d, n_test)), "b")
    pooled = pool(inliers, test)
    m = pooled.m
    K = K or min(5, m - 1)
    sigma2 = sigma2 or float(1.0 + rng.random())
    graph = knn_graph(pooled.features, K, sigma2)
    return pooled, graph
