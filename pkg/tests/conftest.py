import itertools
import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from waldspace.errors import NotInWaldSpace
from waldspace.forest import Split, Wald, _random_resolved, random_wald, sub_wald_from_boundary, validate_topology

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def splits(*texts):
    return [Split.parse(t) for t in texts]


def naive_matrix(w: Wald) -> np.ndarray:
    """Entrywise product over separating splits, written with plain loops."""
    n = w.n_leaves
    block = {}
    for i, b in enumerate(w.topology.partition):
        for u in b:
            block[u] = i
    p = np.eye(n)
    for u, v in itertools.combinations(range(1, n + 1), 2):
        if block[u] != block[v]:
            continue
        value = 1.0
        for s, lam in w.weights.items():
            if s.separates(u, v):
                value *= 1.0 - lam
        p[u - 1, v - 1] = p[v - 1, u - 1] = value
    return p


def four_point_ok(p: np.ndarray, tol: float = 1e-10) -> bool:
    n = p.shape[0]
    for u, v, s, t in itertools.permutations(range(n), 4):
        if p[u, v] * p[s, t] < min(p[u, s] * p[v, t], p[u, t] * p[v, s]) - tol:
            return False
    return True


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@st.composite
def walds(draw, min_leaves=2, max_leaves=8):
    n = draw(st.integers(min_leaves, max_leaves))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_wald(np.random.default_rng(seed), n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def six_leaf_forest():
    """Tree on 1..4 with an interior vertex labelled 2, plus the pair 5, 6."""
    t = validate_topology(splits("1|234", "3|124", "4|123", "12|34", "5|6"), 6)
    return Wald.from_array(t, [0.3, 0.4, 0.5, 0.6, 0.7])


def boundary_configuration(rng, n_leaves):
    """Random ``(E', lambda')`` strictly below a resolved ``(E, lambda*)`` with ``E'`` nonempty."""
    while True:
        t = _random_resolved(rng, n_leaves)
        u = rng.random(len(t.ordered))
        lam = np.where(u < 0.2, 0.0, np.where(u < 0.4, 1.0, rng.uniform(0.05, 0.95, len(u))))
        if np.all((lam > 0) & (lam < 1)):
            continue
        try:
            sub = sub_wald_from_boundary(t, lam)
        except NotInWaldSpace:
            continue
        if sub.weights:
            return t, lam, sub


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
