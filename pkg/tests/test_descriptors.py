import math

import numpy as np
import pytest

from glab.bodies import Ball, cube, random_zonotope, segment
from glab.descriptors import (
    DescriptorConfig,
    direction_measure,
    flag_measure,
    flag_to_direction,
    flag_to_slice,
    grassmann_measure,
    projection_average_measure,
    projection_generating_measure,
    tilde_gamma,
)
from glab.errors import InvalidDimensionError
from glab.geometry import Subspace
from glab.measures import Carrier, compare, grassmann_battery, integrate, push_forward, sphere_battery
from glab.transforms import cosine_measure
from oracles import FROZEN


def near(mu, target, k=3.0):
    v, se = integrate(mu, lambda p: np.ones(len(p)))
    return abs(v - target) <= k * se, v, se


def test_flag_measure_segment_mass():
    mu = flag_measure(segment([1, 0, 0]), DescriptorConfig(1, 100000, seed=1))
    ok, v, se = near(mu, FROZEN["segment_gamma_mass"])
    assert ok, (v, se)
    Carrier.flag(3, 2).check(mu.points)


def test_flag_measure_ball_mass():
    ok, v, se = near(flag_measure(Ball(1.0, 3), DescriptorConfig(1, 50000, seed=2)), FROZEN["disc_V1"])
    assert ok, (v, se)


def test_gamma_is_slice_pushforward_of_flag():
    K = random_zonotope(3, 4, np.random.default_rng(0))
    cfg = DescriptorConfig(1, 3000, seed=3)
    flags = flag_measure(K, cfg)
    sliced = push_forward(flags, flag_to_slice, Carrier.grassmann(3, 1))
    g = grassmann_measure(K, cfg)
    bat = grassmann_battery(3, 1, 5, seed=9)
    assert np.allclose(integrate(sliced, bat)[0], integrate(g, bat)[0], rtol=1e-10)
    assert g.total_mass() == pytest.approx(flags.total_mass(), rel=1e-12)


def test_gamma_ball_mass_and_uniformity():
    g = grassmann_measure(Ball(1.0, 3), DescriptorConfig(1, 100000, seed=4))
    ok, v, se = near(g, FROZEN["disc_V1"])
    assert ok, (v, se)
    # uniform on G(3,1): every bracket probe integrates to mass * 1/2
    vals, ses = integrate(g, grassmann_battery(3, 1, 5, seed=1))
    assert np.all(np.abs(vals[:5] - v / 2) < 4 * ses[:5] + 0.01)


def test_segment_gamma_is_not_a_dirac():
    """A 1-dimensional body: the sampled measure is spread out, with mass pi/2."""
    g = grassmann_measure(segment([1, 0, 0]), DescriptorConfig(1, 100000, seed=5))
    ok, v, se = near(g, FROZEN["segment_gamma_mass"])
    assert ok
    assert abs(v - FROZEN["segment_dirac_claim_mass"]) > 10 * se
    cos_to_e1 = np.abs(g.points[:, 0, 0])
    assert np.average(cos_to_e1, weights=g.weights) < 0.95


def test_rank_deficient_body_gives_empty():
    g = grassmann_measure(segment([1, 0, 0, 0]), DescriptorConfig(2, 200, seed=0))
    assert len(g) == 0 and g.total_mass() == 0.0


def test_tilde_gamma_mass_equals_flag_mass():
    K = cube(3)
    cfg = DescriptorConfig(1, 5000, seed=6)
    assert tilde_gamma(K, cfg).total_mass() == pytest.approx(flag_measure(K, cfg).total_mass(), rel=1e-12)


def test_tilde_gamma_segment_against_weighted_haar():
    """Density against Haar on G(3,2) is V_1(K|L) = 2 ||P_L e1||."""
    from glab.bodies import projection_values
    from glab.geometry import haar_frames
    from glab.measures import EmpiricalMeasure

    K = segment([1, 0, 0])
    t = tilde_gamma(K, DescriptorConfig(1, 50000, seed=7))
    n = 50000
    L = haar_frames(np.random.default_rng(8), n, 3, 2)
    w = EmpiricalMeasure.replicated(
        Carrier.grassmann(3, 2), L, projection_values(K, L, 1) / n, np.arange(n), n
    )
    rep = compare(t, w, grassmann_battery(3, 2, 5, seed=3))
    assert rep.shape_match
    assert rep.fitted == pytest.approx(1.0, rel=0.02)


def test_projection_generating_measure_examples():
    seg = projection_generating_measure(segment([1, 0, 0]), 1)
    assert len(seg) == 1 and seg.weights[0] == pytest.approx(2.0)
    assert abs(abs(seg.points[0, 0, 0]) - 1) < 1e-12
    c = projection_generating_measure(cube(3), 2)
    assert len(c) == 3 and np.allclose(c.weights, 4.0)


def test_projection_generating_measure_reproduces_shadows(rng):
    Z = random_zonotope(4, 7, rng)
    for j in (1, 2):
        pg = projection_generating_measure(Z, j)
        for _ in range(5):
            L = Subspace(np.linalg.qr(rng.standard_normal((4, j)))[0])
            from glab.bodies import projection_function

            assert cosine_measure(pg, L) == pytest.approx(projection_function(Z, L), abs=1e-10)


def test_direction_measure_ball_mass():
    mu = direction_measure(Ball(1.0, 3), DescriptorConfig(1, 20000, seed=9))
    ok, v, se = near(mu, 2 * FROZEN["disc_V1"])
    assert ok or abs(v - 2 * math.pi) < 1e-9


def test_direction_measure_homogeneity():
    K = random_zonotope(4, 5, np.random.default_rng(1))
    cfg = DescriptorConfig(2, 2000, seed=10)
    assert direction_measure(K.scaled(2.0), cfg).total_mass() == pytest.approx(
        4.0 * direction_measure(K, cfg).total_mass(), rel=1e-12
    )


def test_projection_average_ball_mass():
    mu = projection_average_measure(Ball(1.0, 3), 1, 2, DescriptorConfig(1, 20000, seed=11))
    assert mu.total_mass() == pytest.approx(FROZEN["disc_V1"], rel=1e-9)


def test_projection_average_cube_matches_flag_mass():
    cfg = DescriptorConfig(1, 50000, seed=12)
    pa = projection_average_measure(cube(3), 1, 2, cfg)
    fl = flag_measure(cube(3), DescriptorConfig(1, 50000, seed=13))
    a, sa = integrate(pa, lambda u: np.ones(len(u)))
    b, sb = integrate(fl, lambda u: np.ones(len(u)))
    assert abs(a - b) < 3 * math.hypot(sa, sb)


def test_projection_average_is_even():
    mu = projection_average_measure(cube(3), 1, 2, DescriptorConfig(1, 5000, seed=14))
    v, se = integrate(mu, sphere_battery(3, 5, seed=1, odd=True))
    assert np.all(np.abs(v) <= 3 * se + 1e-12)


def test_flag_direction_map_preserves_mass():
    mu = flag_measure(cube(3), DescriptorConfig(1, 1000, seed=15))
    s = push_forward(mu, flag_to_direction, Carrier.sphere(3))
    assert s.total_mass() == mu.total_mass()


def test_bad_degree_rejected():
    with pytest.raises(InvalidDimensionError):
        grassmann_measure(cube(3), DescriptorConfig(3, 10))
    with pytest.raises(InvalidDimensionError):
        DescriptorConfig(0, 10)
