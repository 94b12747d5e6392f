import math

import numpy as np
import pytest
from scipy import stats

from glab.errors import InconsistentFlagError, InvalidDimensionError
from glab.geometry import (
    FlagElement,
    Subspace,
    bracket,
    brackets,
    c_const,
    complement,
    complement_frames,
    constants,
    det_j,
    extend_frames,
    extend_uniform,
    haar_frames,
    haar_inside,
    kappa,
    plucker,
    rho,
    slice_subspace,
    uniform_sphere,
)
from oracles import FROZEN


def test_kappa_values():
    assert kappa(0) == 1.0
    assert math.isclose(kappa(1), 2.0)
    assert math.isclose(kappa(2), math.pi)
    assert math.isclose(kappa(3), FROZEN["kappa3"], rel_tol=1e-12)


def test_c_const_and_rho():
    assert math.isclose(c_const(2, 2, 3, 1), FROZEN["c_2_2_3_1"], rel_tol=1e-12)
    assert math.isclose(rho(3, 1), FROZEN["rho_3_1"], rel_tol=1e-12)
    assert math.isclose(constants(3).rho(1), rho(3, 1))


def test_bracket_examples():
    e = np.eye(3)
    L = Subspace.span(e[0])
    M = Subspace.span(e[0] + e[1])
    assert math.isclose(bracket(L, M), 1 / math.sqrt(2), rel_tol=1e-12)
    assert math.isclose(bracket(Subspace.coordinate(3, [0, 1]), Subspace.coordinate(3, [1, 2])), 0.0, abs_tol=1e-15)
    assert math.isclose(bracket(L, L), 1.0)


def test_bracket_rejects_mismatched_dimensions():
    with pytest.raises(InvalidDimensionError):
        bracket(Subspace.coordinate(3, [0]), Subspace.coordinate(3, [0, 1]))


def test_complement_of_coordinate_plane():
    c = complement(Subspace.coordinate(3, [0, 1]))
    assert c.same_as(Subspace.coordinate(3, [2]))


def test_slice_example():
    L = Subspace.coordinate(3, [0, 1])
    s = slice_subspace(np.array([1.0, 0, 0]), L)
    assert s.same_as(Subspace.coordinate(3, [1]))


def test_flag_element_rejects_outside_direction():
    with pytest.raises(InconsistentFlagError):
        FlagElement(np.array([0, 0, 1.0]), Subspace.coordinate(3, [0, 1]))


def test_det_j():
    assert math.isclose(det_j([1, 0, 0], [1, 1, 0]), 1.0)
    assert math.isclose(det_j([2, 0, 0], [0, 3, 0], [0, 0, 0.5]), 3.0)
    assert det_j([1, 2, 3], [2, 4, 6]) == pytest.approx(0.0, abs=1e-7)


def test_haar_frames_are_orthonormal(rng):
    f = haar_frames(rng, 500, 5, 3)
    g = np.swapaxes(f, 1, 2) @ f
    assert np.max(np.abs(g - np.eye(3))) < 1e-12


def test_haar_bracket_moments(rng):
    # E<L, M>^2 for lines in R^3 is E t^2 = 1/3
    L = haar_frames(rng, 200000, 3, 1)
    b = brackets(np.broadcast_to(np.eye(3)[:, :1], L.shape), L)
    assert b.mean() == pytest.approx(FROZEN["mean_abs_cos_s2"], abs=4 * b.std() / math.sqrt(len(b)))
    assert (b**2).mean() == pytest.approx(FROZEN["mean_sq_cos_s2"], abs=0.005)


def test_plucker_bracket_agrees_with_det(rng):
    a = haar_frames(rng, 50, 5, 2)
    b = haar_frames(rng, 50, 5, 2)
    direct = np.abs(np.linalg.det(np.swapaxes(a, 1, 2) @ b))
    via = np.abs(np.einsum("ni,ni->n", plucker(a), plucker(b)))
    assert np.allclose(direct, via, atol=1e-12)


def test_extend_and_inside_preserve_containment(rng):
    base = haar_frames(rng, 100, 5, 2)
    up = extend_frames(rng, base, 4)
    resid = base - up @ (np.swapaxes(up, 1, 2) @ base)
    assert np.max(np.abs(resid)) < 1e-10
    down = haar_inside(rng, base, 1)
    resid = down - base @ (np.swapaxes(base, 1, 2) @ down)
    assert np.max(np.abs(resid)) < 1e-10


def test_extend_uniform_matches_rejection_oracle():
    """Planes through e1 vs Haar planes conditioned to nearly contain e1."""
    rng = np.random.default_rng(99)
    e1 = np.eye(3)[:, :1]
    ref = Subspace.coordinate(3, [0, 1])
    ext = np.array([bracket(extend_uniform(Subspace(e1), 2, rng), ref) for _ in range(3000)])
    # rejection: a Haar plane with normal n nearly orthogonal to e1
    n = uniform_sphere(rng, 2_000_000, 3)
    n = n[np.abs(n[:, 0]) < 0.01]
    rej = np.abs(n[:, 2])  # <plane, e1e2-plane> = |<n, e3>|
    assert len(rej) > 3000
    assert stats.ks_2samp(ext, rej).pvalue > 0.01


def test_complement_frames_batch(rng):
    f = haar_frames(rng, 20, 5, 2)
    c = complement_frames(f)
    assert c.shape == (20, 5, 3)
    assert np.max(np.abs(np.swapaxes(f, 1, 2) @ c)) < 1e-12
