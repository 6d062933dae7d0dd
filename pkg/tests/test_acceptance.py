"""Acceptance criteria, each run at its stated tolerance.

Every criterion reports one PASS/FAIL line through ``check``; the lines are
repeated in the terminal summary. Criteria whose stated target is not met
by a faithful implementation are strict xfails with the measured value in
the message.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from waldspace.embedding import (
    check_wald_matrix,
    contract_toward_infinity,
    d_phi,
    matrix_blocks,
    phi,
    phi_bar,
    recognize,
    violating_matrix,
    whitney_factor,
)
from waldspace.forest import (
    Split,
    Wald,
    enumerate_topologies,
    lift_to_boundary,
    partial_order_compare,
    random_wald,
    sub_wald_from_boundary,
    validate_topology,
    walds_close,
)
from waldspace.geodesic import GeodesicParams, bhv_comparison_path, geodesic_path, wald_distance
from waldspace.geometry import (
    GroveChart,
    gauss_sectional_curvature,
    metric_derivative,
    metric_tensor,
    sectional_curvature,
)
from waldspace.stats import frechet_mean, one_split_triangle, stickiness_cases, triangle_angle_sum

from conftest import boundary_configuration, splits

RESULTS: list[str] = []


def check(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def fuzz_walds(count, seed):
    rng = np.random.default_rng(seed)
    return [random_wald(rng, int(rng.integers(3, 9))) for _ in range(count)]


# ------------------------------------------------------------ 1: two-leaf distances

EDGE = Split.parse("1|2")
GRID = [round(0.1 * k, 1) for k in range(1, 10)]


def _p(x):
    return math.sqrt(2) * math.sqrt((1 - x) ** 2 + 1)


def printed_distance(a, b):
    """The printed two-leaf closed form; ``b = None`` is the disconnected forest."""
    ra = 1 - a
    second = math.log(((_p(a) + ra) ** 2 - 1) / ((_p(a) - ra) ** 2 - 1))
    if b is None:
        return abs(second / (2 * math.sqrt(2)) - math.log(ra + _p(a) / math.sqrt(2)))
    rb = 1 - b
    first = math.log((rb + _p(b) / math.sqrt(2)) / (ra + _p(a) / math.sqrt(2)))
    second += math.log(((_p(b) - rb) ** 2 - 1) / ((_p(b) + rb) ** 2 - 1))
    return abs(first + second / (2 * math.sqrt(2)))


def arc_length(a, b):
    upper = 1.0 if b is None else b
    return quad(lambda x: math.sqrt(1 / (2 - x) ** 2 + 1 / x**2), a, upper, epsabs=1e-13, epsrel=1e-13)[0]


@pytest.fixture(scope="module")
def two_leaf_grid():
    pairs = [(a, b) for i, a in enumerate(GRID) for b in GRID[i + 1 :]] + [(a, None) for a in GRID]
    start = time.perf_counter()
    values = {}
    for a, b in pairs:
        other = Wald.infinity(2) if b is None else Wald.from_weights({EDGE: b}, 2)
        values[(a, b)] = wald_distance(Wald.from_weights({EDGE: a}, 2), other, GeodesicParams())
    return values, time.perf_counter() - start


def test_criterion_1_two_leaf_distance_against_arc_length(two_leaf_grid):
    values, seconds = two_leaf_grid
    worst = max(abs(d / arc_length(a, b) - 1) for (a, b), d in values.items())
    # the printed formula times sqrt(2) equals the arc length; checked independently here
    scale = max(abs(math.sqrt(2) * printed_distance(a, b) / arc_length(a, b) - 1) for a, b in values)
    check(
        "1 (corrected closed form)",
        worst <= 1e-3 and scale <= 1e-9 and seconds < 60,
        f"{len(values)} pairs, worst relative error {worst:.2e} against sqrt(2) x printed form, {seconds:.1f} s",
    )


@pytest.mark.xfail(strict=True, reason="the printed two-leaf closed form is smaller than the arc length by sqrt(2)")
def test_criterion_1_two_leaf_distance_against_printed_form(two_leaf_grid):
    values, _ = two_leaf_grid
    worst = max(abs(d / printed_distance(a, b) - 1) for (a, b), d in values.items())
    check("1 (printed closed form)", worst <= 1e-3, f"worst relative error {worst:.3f} against the printed form")


# ------------------------------------------------------------ 2 and 3: embedding


def test_criterion_2_recognition_round_trip():
    walds = fuzz_walds(500, 2)
    failures = 0
    for w in walds:
        back = recognize(phi(w))
        if back.topology != w.topology or not walds_close(back, w, 1e-9):
            failures += 1
    sizes = sorted({w.n_leaves for w in walds})
    check("2", failures == 0 and sizes == list(range(3, 9)), f"{len(walds)} wälder, N in {sizes}, {failures} failures")


def test_criterion_3_characterization():
    walds = fuzz_walds(500, 3)
    accepted = sum(check_wald_matrix(phi(w)).ok for w in walds)
    rng = np.random.default_rng(33)
    named = 0
    conditions = ("R2", "R3", "R4")
    for k in range(500):
        condition = conditions[k % 3]
        p = violating_matrix(rng, condition, int(rng.integers(4, 9)))
        named += condition in check_wald_matrix(p).conditions
    check("3", accepted == 500 and named == 500, f"{accepted}/500 images accepted, {named}/500 violations named")


# ------------------------------------------------------------ 4 and 5: boundaries


def test_criterion_4_boundary_correspondence():
    rng = np.random.default_rng(4)
    topologies = enumerate_topologies(4)
    pairs, worst, inverted = 0, 0.0, 0
    for upper in topologies:
        for lower in topologies:
            if lower == upper or partial_order_compare(lower, upper) is None:
                continue
            pairs += 1
            w = Wald.from_array(lower, rng.uniform(0.05, 0.95, len(lower.ordered)))
            lam_star = lift_to_boundary(w, upper)
            worst = max(worst, float(np.max(np.abs(phi_bar(upper, lam_star) - phi(w)))))
            inverted += walds_close(sub_wald_from_boundary(upper, lam_star), w, 1e-12)
    check(
        "4",
        pairs > 0 and worst <= 1e-12 and inverted == pairs,
        f"{pairs} pairs, largest matrix gap {worst:.1e}, {inverted} inverted",
    )


def test_criterion_5_whitney_identity():
    rng = np.random.default_rng(5)
    worst, checked, scaled = 0.0, 0, 0
    for _ in range(100):
        t, lam, sub = boundary_configuration(rng, int(rng.integers(3, 7)))
        witness = partial_order_compare(sub.topology, t)
        for e_prime in sub.topology.ordered:
            e, c = whitney_factor((sub.topology, sub.lambdas), (t, lam), e_prime)
            others = [s for s in witness.corresponding[e_prime] if s != e]
            expected_c = float(np.prod([1 - lam[t.position(s)] for s in others]))
            gap = np.abs(d_phi(t, lam, e) - c * d_phi(sub.topology, sub.lambdas, e_prime))
            worst = max(worst, float(gap.max()), abs(c - expected_c))
            checked += 1
            scaled += c < 1 - 1e-9
    detail = f"{checked} split pairs on 100 configurations ({scaled} with c < 1), worst gap {worst:.1e}"
    check("5", worst <= 1e-9, detail)


# ------------------------------------------------------------ 6: boundary-sojourning geodesic


def test_criterion_6_geodesic_through_the_boundary():
    s1, s2, s3 = Split.parse("1|23"), Split.parse("2|13"), Split.parse("3|12")
    a = Wald.from_weights({s1: 0.1, s2: 0.9, s3: 0.07}, 3)
    b = Wald.from_weights({s1: 0.3, s2: 0.1, s3: 0.9}, 3)
    path = geodesic_path(a, b)
    lowest = min(w.weight(s1) if s1 in w.weights else 0.0 for w in path.points[1:-1])
    comparison = bhv_comparison_path(a, b, len(path) - 1)
    check(
        "6",
        lowest <= 0.01 and path.energy < comparison.energy,
        f"min interior weight of 1|23 {lowest:.2e}, energy {path.energy:.5f} vs comparison {comparison.energy:.5f}",
    )


# ------------------------------------------------------------ 7: curvature

TRIPOD = splits("1|23", "2|13", "3|12")


def _tripod_chart(a):
    return GroveChart(validate_topology(TRIPOD, 3), [a, a, a])


def _extremes_both_routes(a):
    """Extremes over random planes by the Gauss equation, confirmed by the differenced tensor."""
    c = _tripod_chart(a)
    rng = np.random.default_rng(0)
    planes = [rng.standard_normal((2, 3)) for _ in range(500)]
    gauss = [gauss_sectional_curvature(c, x, y) for x, y in planes]
    lo, hi = int(np.argmin(gauss)), int(np.argmax(gauss))
    fd = [sectional_curvature(c, *planes[i]) for i in (lo, hi)]
    agree = max(abs(fd[0] - gauss[lo]), abs(fd[1] - gauss[hi]))
    return gauss[lo], gauss[hi], agree


def test_criterion_7_curvature_signs():
    k_min, k_max, agree = _extremes_both_routes(0.5)
    derivative_gap = 0.0
    for a in np.linspace(0.1, 0.9, 9):
        c = _tripod_chart(a)
        h = 1e-6
        fd = np.array(
            [(metric_tensor(c.moved(k, h)).g - metric_tensor(c.moved(k, -h)).g) / (2 * h) for k in range(3)]
        )
        derivative_gap = max(derivative_gap, float(np.max(np.abs(fd - metric_derivative(c)))))
    check(
        "7 (signs at a = 0.5)",
        k_min < -0.01 and k_max > 0.01 and agree <= 1e-6 and derivative_gap <= 1e-5,
        f"K in [{k_min:.4f}, {k_max:.4f}], routes agree to {agree:.1e}, metric derivative gap {derivative_gap:.1e}",
    )


@pytest.mark.xfail(strict=True, reason="curvature stays bounded near the disconnected forest on three leaves")
def test_criterion_7_curvature_growth():
    lo5, hi5, _ = _extremes_both_routes(0.5)
    lo9, hi9, agree = _extremes_both_routes(0.9)
    at5, at9 = max(abs(lo5), abs(hi5)), max(abs(lo9), abs(hi9))
    # the differenced tensor loses accuracy as a grows; 5e-5 is measured at a = 0.9
    assert agree <= 1e-4
    check("7 (growth toward a = 1)", at9 > at5, f"max|K| {at9:.4f} at a = 0.9 vs {at5:.4f} at a = 0.5")


# ------------------------------------------------------------ 8: contraction


def test_criterion_8_contraction():
    rng = np.random.default_rng(8)
    walds = [random_wald(rng, int(rng.integers(2, 9))) for _ in range(200)]
    xs = [round(0.05 * k, 2) for k in range(1, 20)]
    bad = 0
    for w in walds:
        blocks = matrix_blocks(phi(w))
        for x in xs:
            p = x * np.eye(w.n_leaves) + (1 - x) * phi(w)
            c = contract_toward_infinity(w, x)
            if not check_wald_matrix(p).ok or matrix_blocks(p) != blocks:
                bad += 1
            elif set(c.topology.partition) != set(w.topology.partition):
                bad += 1
    check("8", bad == 0, f"{len(walds) * len(xs)} contracted matrices, {bad} failures")


# ------------------------------------------------------------ 9: triangles

TRIANGLE_WEIGHTS = (0.5, 0.8, 0.9, 0.95)


@pytest.fixture(scope="module")
def triangle_sums():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {x: triangle_angle_sum(*one_split_triangle(x)) for x in TRIANGLE_WEIGHTS}


def test_criterion_9_angle_sums_increase(triangle_sums):
    values = [triangle_sums[x] for x in TRIANGLE_WEIGHTS]
    increasing = all(a < b for a, b in zip(values[:-1], values[1:]))
    text = ", ".join(f"{x}: {v:.2f}" for x, v in triangle_sums.items())
    check("9 (monotone toward 180)", increasing and values[-1] < 180 + 1e-6, f"angle sums {text}")


@pytest.mark.xfail(strict=True, reason="the deficit at weight 0.95 is about 5 degrees, as the corner model predicts")
def test_criterion_9_flat_at_095(triangle_sums):
    total = triangle_sums[0.95]
    check("9 (within 2 degrees at 0.95)", abs(total - 180) <= 2, f"angle sum {total:.3f} at weight 0.95")


# ------------------------------------------------------------ 10: stickiness


@pytest.mark.slow
def test_criterion_10_stickiness(tmp_path_factory):
    cases = stickiness_cases()
    out = tmp_path_factory.mktemp("heatmaps")
    results = {}
    for name, case in cases.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = frechet_mean(case.sample, case.search)
        results[name] = res
        path = out / f"heatmap_{name}.csv"
        np.savetxt(path, res.grid, delimiter=",", header="lambda_pen,lambda_int,frechet_value", comments="")
        back = np.loadtxt(path, delimiter=",", skiprows=1)
        assert back.shape == res.grid.shape
    a, b = results["A"], results["B"]
    resolution = cases["A"].search.resolution
    check(
        "10",
        a.sticky and a.inner == 0.0 and not b.sticky and b.inner > resolution,
        f"A: inner {a.inner:.4f} value {a.value:.3e}; B: inner {b.inner:.4f} value {b.value:.3e}; "
        f"resolution {resolution:.2f}",
    )

