import re
from pathlib import Path

import numpy as np
import pytest

from asymspec.basis import FilterSpec
from asymspec.graphcore import Graph, graph_matrix
from asymspec.model import GNNObjective, init_params

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[int, str] = {}


def random_graph(n, p=0.3, seed=0, d=4, n_classes=3, connect=True):
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    edges = np.stack([iu[0][keep], iu[1][keep]], axis=1)
    if connect:
        chain = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        edges = np.concatenate([edges, chain])
    x = rng.standard_normal((n, d))
    labels = rng.integers(0, n_classes, size=n)
    k = min(n, n_classes)
    labels[:k] = np.arange(k)
    return Graph(n, edges, x, labels, n_classes)


def gnn_instance(family="chebyshev", K=3, n=10, d=4, hidden=5, n_classes=3, seed=0, dropout=0.0, **spec_kw):
    g = random_graph(n, seed=seed, d=d, n_classes=n_classes)
    spec = FilterSpec(family, K, **spec_kw)
    m = graph_matrix(g, spec.operator)
    train = np.arange(0, n, 2)
    val = np.arange(1, n, 2)
    obj = GNNObjective(spec, m, g.features, g.labels, train, val, dropout, dropout)
    p = init_params(seed + 1, d, hidden, n_classes, K, family)
    rng = np.random.default_rng(seed + 2)
    p.theta = p.theta + 0.3 * rng.standard_normal(p.theta.shape)
    p.b1 = 0.1 * rng.standard_normal(p.b1.shape)
    p.b2 = 0.1 * rng.standard_normal(p.b2.shape)
    return obj, p


def block_lr(p, lr_t, lr_w):
    return np.concatenate([np.full(p.d_theta, lr_t), np.full(p.d_w, lr_w)])


def bare_gd(obj, p0, lr_t, lr_w, wd_t, wd_w, steps, seed):
    lr, wd = block_lr(p0, lr_t, lr_w), block_lr(p0, wd_t, wd_w)
    x = p0.flat()
    for t in range(steps):
        g = obj.train_loss_and_grad(p0.unflatten(x), seed=(seed, t))[1].flat()
        x = x - lr * (g + wd * x)
    return x


def bare_adam(obj, p0, lr_t, lr_w, wd_t, wd_w, steps, seed, b1=0.9, b2=0.999, eps=1e-8):
    lr, wd = block_lr(p0, lr_t, lr_w), block_lr(p0, wd_t, wd_w)
    x = p0.flat()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(1, steps + 1):
        g = obj.train_loss_and_grad(p0.unflatten(x), seed=(seed, t - 1))[1].flat()
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        d = (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        x = x - lr * (d + wd * x)
    return x


@pytest.fixture
def toy_dir():
    return FIXTURES / "toy4"


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m or "test_acceptance.py" not in report.nodeid:
        return
    k = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        prev = _criteria.get(k, "PASS")
        _criteria[k] = "FAIL" if (report.outcome != "passed" or prev == "FAIL") else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        terminalreporter.write_line(f"criterion {k:2d}: {_criteria[k]}")
